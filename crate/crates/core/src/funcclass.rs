//! Finite Q-function classes and their greedy policies.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdp::{EpisodeMeter, LayeredCdp, Observation, Path, Policy};
use crate::error::{Error, Result};

/// How a Q-function computes its predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Representation {
    /// One row of `K` values per observation token; unseen tokens map to `default`.
    Table {
        #[serde(with = "token_rows")]
        values: BTreeMap<u64, Vec<f64>>,
        #[serde(default)]
        default: f64,
    },
    /// `clip(bias[a] + weights[a] · features, 0, 1)`.
    Linear { weights: Vec<Vec<f64>>, bias: Vec<f64> },
    /// `base + bonus` when `history ∘ a` is a prefix of `path`, else `base`.
    PathIndexed { path: Vec<usize>, base: f64, bonus: f64 },
}

/// Table rows as a list of `[token, [q_1, …, q_K]]` pairs; JSON object keys
/// would be strings.
mod token_rows {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rows: &BTreeMap<u64, Vec<f64>>, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(rows.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<u64, Vec<f64>>, D::Error> {
        let rows = Vec::<(u64, Vec<f64>)>::deserialize(de)?;
        Ok(rows.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    pub id: usize,
    #[serde(flatten)]
    pub repr: Representation,
}

impl QFunction {
    pub fn table(id: usize, values: BTreeMap<u64, Vec<f64>>) -> Self {
        Self { id, repr: Representation::Table { values, default: 0.0 } }
    }

    pub fn path_indexed(id: usize, path: Vec<usize>, base: f64, bonus: f64) -> Self {
        Self { id, repr: Representation::PathIndexed { path, base, bonus } }
    }

    pub fn eval(&self, x: &Observation, action: usize) -> f64 {
        match &self.repr {
            Representation::Table { values, default } => {
                values.get(&x.token).and_then(|row| row.get(action)).copied().unwrap_or(*default)
            }
            Representation::Linear { weights, bias } => {
                let mut v = bias.get(action).copied().unwrap_or(0.0);
                if let (Some(w), Some(phi)) = (weights.get(action), x.features.as_ref()) {
                    v += w.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
                }
                v.clamp(0.0, 1.0)
            }
            Representation::PathIndexed { path, base, bonus } => {
                let h = x.history();
                let on_path = h.len() < path.len() && path.starts_with(h) && path[h.len()] == action;
                if on_path {
                    base + bonus
                } else {
                    *base
                }
            }
        }
    }

    /// Greedy action and its predicted value; ties go to the lowest action.
    pub fn greedy(&self, x: &Observation, num_actions: usize) -> (usize, f64) {
        if let Representation::Table { values, .. } = &self.repr {
            if let Some(row) = values.get(&x.token) {
                return argmax(&row[..num_actions.min(row.len())]);
            }
        }
        let mut best = (0, self.eval(x, 0));
        for a in 1..num_actions {
            let v = self.eval(x, a);
            if v > best.1 {
                best = (a, v);
            }
        }
        best
    }

    pub fn greedy_action(&self, x: &Observation, num_actions: usize) -> usize {
        self.greedy(x, num_actions).0
    }

    /// The policy `π_f`.
    pub fn policy(&self, num_actions: usize) -> GreedyPolicy<'_> {
        GreedyPolicy { f: self, num_actions }
    }

    fn check_range(&self) -> Result<()> {
        let bad = |v: f64| !(0.0..=1.0).contains(&v);
        match &self.repr {
            Representation::Table { values, default } => {
                if bad(*default) || values.values().flatten().any(|&v| bad(v)) {
                    return Err(Error::InvalidClass(format!("function {} has values outside [0,1]", self.id)));
                }
            }
            Representation::PathIndexed { base, bonus, .. } => {
                if bad(*base) || bad(base + bonus) {
                    return Err(Error::InvalidClass(format!("function {} has values outside [0,1]", self.id)));
                }
            }
            Representation::Linear { .. } => {}
        }
        Ok(())
    }
}

/// Lowest index attaining the maximum.
pub fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (a, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (a, v);
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct GreedyPolicy<'a> {
    f: &'a QFunction,
    num_actions: usize,
}

impl Policy for GreedyPolicy<'_> {
    fn act(&self, x: &Observation) -> usize {
        self.f.greedy_action(x, self.num_actions)
    }
}

/// Policy given by a token → action table, e.g. the open-loop policies of the
/// combination lock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub actions: BTreeMap<u64, usize>,
    #[serde(default)]
    pub default: usize,
}

impl Policy for TabularPolicy {
    fn act(&self, x: &Observation) -> usize {
        self.actions.get(&x.token).copied().unwrap_or(self.default)
    }
}

/// A finite class of candidate Q-functions.
///
/// `star_index` marks the member equal to Q* when the generator knows it. It
/// exists for test harnesses; the learner never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionClass {
    pub members: Vec<QFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star_index: Option<usize>,
}

impl FunctionClass {
    pub fn new(members: Vec<QFunction>, star_index: Option<usize>) -> Result<Self> {
        let class = Self { members, star_index };
        class.validate()?;
        Ok(class)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<usize> = self.members.iter().map(|f| f.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidClass("duplicate function ids".into()));
        }
        if let Some(i) = self.star_index {
            if i >= self.members.len() {
                return Err(Error::InvalidClass(format!("star index {i} out of range")));
            }
        }
        self.members.iter().try_for_each(QFunction::check_range)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn star(&self) -> Option<&QFunction> {
        self.star_index.map(|i| &self.members[i])
    }

    pub fn star_id(&self) -> Option<usize> {
        self.star().map(|f| f.id)
    }

    pub fn by_id(&self, id: usize) -> Option<&QFunction> {
        self.members.iter().find(|f| f.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("function class serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let class: Self = serde_json::from_str(s).map_err(|e| Error::InvalidClass(e.to_string()))?;
        class.validate()?;
        Ok(class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub estimate: f64,
    pub samples: u64,
    pub stamp: u64,
}

/// Monte-Carlo value predictions `V̂^f(p, π_f)` keyed by `(path, function id)`.
#[derive(Debug, Clone, Default)]
pub struct ValueCache {
    entries: HashMap<(Path, usize), CacheEntry>,
    clock: u64,
}

impl ValueCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overwrites the entry; later writes are fresher.
    pub fn write(&mut self, path: &Path, function: usize, estimate: f64, samples: u64) {
        self.clock += 1;
        let entry = CacheEntry { estimate, samples, stamp: self.clock };
        self.entries.insert((path.clone(), function), entry);
    }

    pub fn get(&self, path: &Path, function: usize) -> Option<&CacheEntry> {
        self.entries.get(&(path.clone(), function))
    }

    pub fn estimate(&self, path: &Path, function: usize) -> Option<f64> {
        self.get(path, function).map(|e| e.estimate)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Estimates `V^f(p, π_f) = E_{x ~ D_p} f(x, π_f(x))` for every member from
/// `n` observations drawn at `path` (`n` episodes), and writes the estimates
/// into `cache`. At `|p| = H` every prediction is 0 and nothing is sampled.
pub fn mc_value_prediction<R: Rng + ?Sized>(
    cdp: &LayeredCdp,
    path: &Path,
    members: &[QFunction],
    n: u64,
    rng: &mut R,
    meter: &mut EpisodeMeter,
    cache: &mut ValueCache,
) -> Result<BTreeMap<usize, f64>> {
    if n == 0 {
        return Err(Error::Unsupported("value prediction needs at least one sample".into()));
    }
    let k = cdp.num_actions();
    let mut sums = vec![0.0; members.len()];
    let samples = if path.len() == cdp.horizon() {
        0
    } else {
        for _ in 0..n {
            let x = cdp.sample_observation(path, rng, meter)?;
            for (sum, f) in sums.iter_mut().zip(members) {
                *sum += f.greedy(&x, k).1;
            }
        }
        n
    };
    let mut out = BTreeMap::new();
    for (sum, f) in sums.into_iter().zip(members) {
        let est = if samples == 0 { 0.0 } else { sum / samples as f64 };
        cache.write(path, f.id, est, samples);
        out.insert(f.id, est);
    }
    Ok(out)
}
