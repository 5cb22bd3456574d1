//! Instance generators and assumption validators.
//!
//! Generated environments put nonzero reward only at the last level, which
//! keeps every trajectory's total reward in `[0, 1]`. This is a choice of the
//! generators; the model itself allows rewards at every level.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdp::{LayeredCdp, ObsRewardDist, Observation, Path, RewardSpec, StateId, SupportPoint};
use crate::error::{Error, Result};
use crate::funcclass::{FunctionClass, QFunction, TabularPolicy};
use crate::oracle::{self, ExactValues};
use crate::rng::{derive, StreamRng};

const MAX_ATTEMPTS: u64 = 100;
/// Minimum sup-distance between a distractor and Q* on reachable points.
pub const MIN_DISTRACTOR_GAP: f64 = 0.05;
/// Half-width of the uniform noise added to Q* for perturbed distractors.
pub const PERTURBATION: f64 = 0.3;
const FEATURE_DIM: usize = 4;
const MAX_LOCK_CLASS: usize = 100_000;
const AGREEMENT_TOL: f64 = 1e-9;

/// An environment together with its candidate function class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub cdp: LayeredCdp,
    pub class: FunctionClass,
}

/// The combination lock: environment, path-indexed regressors and open-loop policies.
#[derive(Debug, Clone, PartialEq)]
pub struct LockInstance {
    pub cdp: LayeredCdp,
    pub class: FunctionClass,
    pub policies: Vec<TabularPolicy>,
    pub p_star: Vec<usize>,
}

type ObsKey<'a> = (u64, &'a [usize]);

#[derive(Clone, Copy)]
enum RewardConditioning {
    PerState,
    PerObservation,
}

/// Random layered environment with state-disjoint tokens and a realizable
/// class `{Q*} ∪ {N − 1 distractors}`.
///
/// Levels hold `1, min(M, K), min(M, K·m_2), …` states so that every state is
/// reachable. Rewards are Bernoulli at level `H` with a mean per (state, action)
/// shared by all of the state's observations.
pub fn make_random_realizable(m: usize, k: usize, h: usize, n: usize, obs_per_state: usize, seed: u64) -> Result<Instance> {
    generate(m, k, h, n, obs_per_state, seed, RewardConditioning::PerState, false)
}

/// Like [`make_random_realizable`] but reward means are drawn per
/// (observation, action) and observations carry random feature vectors.
/// Tokens never repeat across states, so a token identifies its state.
pub fn make_disjoint_obs(m: usize, k: usize, h: usize, obs_per_state: usize, n: usize, seed: u64) -> Result<Instance> {
    generate(m, k, h, n, obs_per_state, seed, RewardConditioning::PerObservation, true)
}

#[allow(clippy::too_many_arguments)]
fn generate(
    m: usize,
    k: usize,
    h: usize,
    n: usize,
    obs_per_state: usize,
    seed: u64,
    conditioning: RewardConditioning,
    features: bool,
) -> Result<Instance> {
    if m == 0 || k == 0 || h == 0 || n == 0 || obs_per_state == 0 {
        return Err(Error::InvalidCdp("M, K, H, N and observations per state must be positive".into()));
    }
    let mut last_err = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = derive(seed, &[0x6e6e, attempt]);
        let cdp = random_cdp(&mut rng, m, k, h, obs_per_state, conditioning, features)?;
        let built = realizable_class(&cdp, n, &mut rng).and_then(|class| {
            check_instance(&cdp, &class)?;
            Ok(class)
        });
        match built {
            Ok(class) => return Ok(Instance { cdp, class }),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::ValidationFailed(format!(
        "no valid instance after {MAX_ATTEMPTS} attempts: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

fn random_cdp(
    rng: &mut StreamRng,
    m: usize,
    k: usize,
    h: usize,
    obs_per_state: usize,
    conditioning: RewardConditioning,
    features: bool,
) -> Result<LayeredCdp> {
    let mut sizes = vec![1usize];
    for _ in 1..h {
        let prev = *sizes.last().unwrap();
        sizes.push(m.min(prev.saturating_mul(k)));
    }

    let mut transitions = Vec::with_capacity(h.saturating_sub(1));
    for lvl in 0..h.saturating_sub(1) {
        let (here, there) = (sizes[lvl], sizes[lvl + 1]);
        // every next-level state gets at least one incoming edge
        let mut targets: Vec<usize> = (0..there).collect();
        while targets.len() < here * k {
            targets.push(rng.gen_range(0..there));
        }
        targets.shuffle(rng);
        transitions.push(targets.chunks(k).map(<[usize]>::to_vec).collect::<Vec<_>>());
    }

    let mut next_token = 0u64;
    let mut observations = Vec::with_capacity(h);
    for (lvl, &size) in sizes.iter().enumerate() {
        let last = lvl + 1 == h;
        let mut level = Vec::with_capacity(size);
        for _ in 0..size {
            let weights: Vec<f64> = (0..obs_per_state).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let state_means: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            let mut support = Vec::with_capacity(obs_per_state);
            for w in weights {
                let rewards = if last {
                    match conditioning {
                        RewardConditioning::PerState => {
                            state_means.iter().map(|&mean| RewardSpec::Bernoulli { mean }).collect()
                        }
                        RewardConditioning::PerObservation => {
                            (0..k).map(|_| RewardSpec::Bernoulli { mean: rng.gen() }).collect()
                        }
                    }
                } else {
                    vec![RewardSpec::zero(); k]
                };
                let observation = if features {
                    Observation::with_features(next_token, (0..FEATURE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
                } else {
                    Observation::token(next_token)
                };
                next_token += 1;
                support.push(SupportPoint { observation, prob: w / total, rewards });
            }
            level.push(ObsRewardDist::new(support)?);
        }
        observations.push(level);
    }
    LayeredCdp::new(h, k, sizes, 0, transitions, observations, false)
}

/// Reachable `(state, token, Q* row)` triples.
fn reachable_points(cdp: &LayeredCdp, exact: &ExactValues) -> Vec<(StateId, u64, Vec<f64>)> {
    let mut out = Vec::new();
    for s in cdp.reachable_states() {
        for pt in cdp.dist(s).support() {
            let t = pt.observation.token;
            out.push((s, t, exact.q_star[&(s, t)].clone()));
        }
    }
    out
}

fn sup_gap(f: &QFunction, cdp: &LayeredCdp, points: &[(StateId, u64, Vec<f64>)]) -> f64 {
    let mut worst: f64 = 0.0;
    for (s, t, row) in points {
        let pt = cdp.dist(*s).support().iter().find(|p| p.observation.token == *t).expect("token in support");
        for (a, q) in row.iter().enumerate() {
            worst = worst.max((f.eval(&pt.observation, a) - q).abs());
        }
    }
    worst
}

fn perturbed(star: &QFunction, rng: &mut StreamRng) -> QFunction {
    let crate::funcclass::Representation::Table { values, .. } = &star.repr else {
        unreachable!("Q* is built as a table")
    };
    let noisy = values
        .iter()
        .map(|(&t, row)| (t, row.iter().map(|&q| (q + rng.gen_range(-PERTURBATION..=PERTURBATION)).clamp(0.0, 1.0)).collect()))
        .collect();
    QFunction::table(0, noisy)
}

/// Q-function of a uniformly random reactive policy that differs from the
/// optimal greedy policy on some reachable token.
fn other_policy_q(cdp: &LayeredCdp, star: &QFunction, rng: &mut StreamRng) -> Result<Option<QFunction>> {
    let k = cdp.num_actions();
    let reachable = cdp.reachable_states();
    let mut actions = BTreeMap::new();
    let mut differs = false;
    for &s in &reachable {
        for pt in cdp.dist(s).support() {
            let a = rng.gen_range(0..k);
            differs |= a != star.greedy_action(&pt.observation, k);
            actions.insert(pt.observation.token, a);
        }
    }
    if !differs {
        return Ok(None);
    }
    let policy = TabularPolicy { actions, default: 0 };
    let v = oracle::policy_state_values(cdp, &policy)?;
    let mut values = BTreeMap::new();
    for &s in &reachable {
        for pt in cdp.dist(s).support() {
            let row = (0..k)
                .map(|a| {
                    let next = cdp.next(s, a);
                    let tail = if cdp.is_terminal(next) { 0.0 } else { v[next.level - 1][next.index] };
                    pt.mean_reward(a) + tail
                })
                .collect();
            values.insert(pt.observation.token, row);
        }
    }
    Ok(Some(QFunction::table(0, values)))
}

fn realizable_class(cdp: &LayeredCdp, n: usize, rng: &mut StreamRng) -> Result<FunctionClass> {
    let exact = oracle::compute_exact_values(cdp)?;
    let star = exact.q_star_function(cdp, 0)?;
    let points = reachable_points(cdp, &exact);

    let mut members = vec![star.clone()];
    for j in 1..n {
        let mut candidate = None;
        if j % 2 == 0 {
            for _ in 0..20 {
                if let Some(f) = other_policy_q(cdp, &star, rng)? {
                    if sup_gap(&f, cdp, &points) >= MIN_DISTRACTOR_GAP {
                        candidate = Some(f);
                        break;
                    }
                }
            }
        }
        let f = match candidate {
            Some(f) => f,
            None => loop {
                let f = perturbed(&star, rng);
                if sup_gap(&f, cdp, &points) >= MIN_DISTRACTOR_GAP {
                    break f;
                }
            },
        };
        members.push(f);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut slots: Vec<Option<QFunction>> = members.into_iter().map(Some).collect();
    let mut shuffled = Vec::with_capacity(n);
    let mut star_index = 0;
    for (pos, &src) in order.iter().enumerate() {
        let mut f = slots[src].take().expect("each member placed once");
        f.id = pos;
        if src == 0 {
            star_index = pos;
        }
        shuffled.push(f);
    }
    FunctionClass::new(shuffled, Some(star_index))
}

fn check_instance(cdp: &LayeredCdp, class: &FunctionClass) -> Result<()> {
    let report = validate_assumptions(cdp, class)?;
    if !report.all_hold() {
        return Err(Error::ValidationFailed(format!("{report:?}")));
    }
    let exact = oracle::compute_exact_values(cdp)?;
    let star = class.star().expect("generated classes mark Q*");
    let v = oracle::policy_value_exact(cdp, &star.policy(cdp.num_actions()))?;
    if (v - exact.root_value(cdp)).abs() > AGREEMENT_TOL {
        return Err(Error::ValidationFailed(format!("greedy Q* policy value {v} != V* {}", exact.root_value(cdp))));
    }
    let reach = cdp.reachable();
    if reach.iter().any(|lvl| lvl.iter().any(|r| !r)) {
        return Err(Error::ValidationFailed("unreachable state".into()));
    }
    Ok(())
}

/// The combination lock of horizon `H` with `K` actions.
///
/// Two states per level, good (`index 0`) and bad (`index 1`). Both emit the
/// level's token, so the token carries no information; the emitted observation
/// also carries the action history so path-indexed regressors remain functions
/// of the observation. Only the path `p*` earns `Bernoulli(1/2 + ε)` at the end;
/// everything else earns `Bernoulli(1/2)`.
pub fn make_lock(h: usize, k: usize, epsilon: f64, p_star: Option<Vec<usize>>, seed: u64) -> Result<LockInstance> {
    if h == 0 || k == 0 {
        return Err(Error::InvalidCdp("H and K must be positive".into()));
    }
    if !(epsilon > 0.0 && epsilon < (1.0f64 / 8.0).sqrt()) {
        return Err(Error::InvalidCdp(format!("lock epsilon {epsilon} outside (0, sqrt(1/8))")));
    }
    let count = (k as u64).checked_pow(h as u32).filter(|&c| c <= MAX_LOCK_CLASS as u64);
    let Some(count) = count else {
        return Err(Error::SizeGuardExceeded { work: u64::MAX, limit: MAX_LOCK_CLASS as u64 });
    };
    let p_star = match p_star {
        Some(p) => p,
        None => {
            let mut rng = derive(seed, &[0x10c]);
            (0..h).map(|_| rng.gen_range(0..k)).collect()
        }
    };
    if p_star.len() != h || p_star.iter().any(|&a| a >= k) {
        return Err(Error::InvalidCdp(format!("optimal path {p_star:?} is not a length-{h} action sequence")));
    }

    const GOOD: usize = 0;
    const BAD: usize = 1;
    let transitions = (0..h.saturating_sub(1))
        .map(|lvl| {
            let good = (0..k).map(|a| if a == p_star[lvl] { GOOD } else { BAD }).collect();
            vec![good, vec![BAD; k]]
        })
        .collect();
    let observations = (1..=h)
        .map(|lvl| {
            let token = Observation::token(lvl as u64);
            if lvl < h {
                vec![
                    ObsRewardDist::point(token.clone(), vec![RewardSpec::zero(); k]),
                    ObsRewardDist::point(token, vec![RewardSpec::zero(); k]),
                ]
            } else {
                let good = (0..k)
                    .map(|a| RewardSpec::Bernoulli { mean: if a == p_star[h - 1] { 0.5 + epsilon } else { 0.5 } })
                    .collect();
                vec![
                    ObsRewardDist::point(token.clone(), good),
                    ObsRewardDist::point(token, vec![RewardSpec::Bernoulli { mean: 0.5 }; k]),
                ]
            }
        })
        .collect();
    let cdp = LayeredCdp::new(h, k, vec![2; h], GOOD, transitions, observations, true)?;

    let paths: Vec<Vec<usize>> = (0..count).map(|i| index_to_path(i, k, h)).collect();
    let star_index = paths.iter().position(|p| *p == p_star).expect("p* is enumerated");
    let members = paths.iter().enumerate().map(|(id, p)| QFunction::path_indexed(id, p.clone(), 0.5, epsilon)).collect();
    let class = FunctionClass::new(members, Some(star_index))?;
    let policies = paths
        .iter()
        .map(|p| TabularPolicy {
            actions: p.iter().enumerate().map(|(lvl, &a)| ((lvl + 1) as u64, a)).collect(),
            default: 0,
        })
        .collect();
    Ok(LockInstance { cdp, class, policies, p_star })
}

/// Lexicographic enumeration of `K^H` action sequences.
pub fn index_to_path(mut i: u64, k: usize, h: usize) -> Vec<usize> {
    let mut p = vec![0; h];
    for slot in p.iter_mut().rev() {
        *slot = (i % k as u64) as usize;
        i /= k as u64;
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssumptionCheck {
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

impl AssumptionCheck {
    fn pass() -> Self {
        Self { holds: true, counterexample: None }
    }

    fn fail(why: String) -> Self {
        Self { holds: false, counterexample: Some(why) }
    }
}

/// Outcome of checking reactivity of Q*, realizability and determinism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssumptionReport {
    pub reactive_q_star: AssumptionCheck,
    pub realizable: AssumptionCheck,
    /// Ids of members equal to Q* on every reachable point.
    pub realizing_ids: Vec<usize>,
    pub deterministic: AssumptionCheck,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.reactive_q_star.holds && self.realizable.holds && self.deterministic.holds
    }
}

/// Checks, on reachable states only:
/// * Q* agrees across states that emit the same observation;
/// * some member of `class` equals Q* within 1e-9 at every emitted observation;
/// * the transition table is layered and deterministic.
pub fn validate_assumptions(cdp: &LayeredCdp, class: &FunctionClass) -> Result<AssumptionReport> {
    let exact = oracle::compute_exact_values(cdp)?;
    let k = cdp.num_actions();
    let reachable = cdp.reachable_states();

    // Every (path, state, emitted observation) an agent can see.
    let mut points: Vec<(StateId, crate::cdp::Observation, u64)> = Vec::new();
    if cdp.reveals_history() {
        let mut stack = vec![Path::root()];
        while let Some(p) = stack.pop() {
            let s = cdp.resolve(&p)?;
            for pt in cdp.dist(s).support() {
                points.push((s, cdp.emit(pt, &p), pt.observation.token));
            }
            if p.len() + 1 < cdp.horizon() {
                stack.extend((0..k).map(|a| p.child(a)));
            }
        }
    } else {
        for &s in &reachable {
            for pt in cdp.dist(s).support() {
                points.push((s, pt.observation.clone(), pt.observation.token));
            }
        }
    }
    // Q* must agree across states that emit the same observation.
    let mut by_obs: HashMap<ObsKey, (StateId, &[f64])> = HashMap::new();
    let mut reactive = AssumptionCheck::pass();
    for (s, x, t) in &points {
        let row = exact.q(*s, *t).expect("Q* row for every support point");
        match by_obs.get(&(*t, x.history())) {
            Some(&(other, prev)) => {
                let gap = prev.iter().zip(row).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if gap > AGREEMENT_TOL {
                    reactive =
                        AssumptionCheck::fail(format!("states {other} and {s} share token {t} but Q* differs by {gap}"));
                    break;
                }
            }
            None => {
                by_obs.insert((*t, x.history()), (*s, row));
            }
        }
    }
    let mut realizing_ids = Vec::new();
    let mut closest: Option<(usize, f64, String)> = None;
    for f in &class.members {
        let mut worst = (0.0f64, String::new());
        for (s, x, t) in &points {
            let row = &exact.q_star[&(*s, *t)];
            for (a, &q) in row.iter().enumerate() {
                let d = (f.eval(x, a) - q).abs();
                if d > worst.0 {
                    worst = (d, format!("state {s}, token {t}, action {a}: f = {}, Q* = {q}", f.eval(x, a)));
                }
            }
        }
        if worst.0 <= AGREEMENT_TOL {
            realizing_ids.push(f.id);
        } else if closest.as_ref().is_none_or(|c| worst.0 < c.1) {
            closest = Some((f.id, worst.0, worst.1));
        }
    }
    let realizable = if !realizing_ids.is_empty() {
        AssumptionCheck::pass()
    } else {
        match closest {
            Some((id, gap, at)) => AssumptionCheck::fail(format!("closest member {id} misses Q* by {gap} at {at}")),
            None => AssumptionCheck::fail("empty function class".into()),
        }
    };

    let mut deterministic = AssumptionCheck::pass();
    for s in cdp.states() {
        for a in 0..k {
            let next = cdp.next(s, a);
            if next.level != s.level + 1 || (!cdp.is_terminal(next) && next.index >= cdp.level_sizes()[next.level - 1]) {
                deterministic = AssumptionCheck::fail(format!("{s} --{a}--> {next} is not layered"));
            }
        }
    }

    Ok(AssumptionReport { reactive_q_star: reactive, realizable, realizing_ids, deterministic })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_to_path_is_lexicographic() {
        assert_eq!(index_to_path(0, 2, 3), vec![0, 0, 0]);
        assert_eq!(index_to_path(5, 2, 3), vec![1, 0, 1]);
        assert_eq!(index_to_path(7, 3, 2), vec![2, 1]);
    }

    #[test]
    fn trivial_bandit_instance() {
        let inst = make_random_realizable(1, 1, 1, 1, 1, 3).unwrap();
        assert_eq!(inst.cdp.num_states(), 1);
        assert_eq!(inst.class.len(), 1);
        assert_eq!(inst.class.star_index, Some(0));
    }

    #[test]
    fn lock_rejects_bad_parameters() {
        assert!(make_lock(3, 2, 0.5, None, 0).is_err());
        assert!(make_lock(3, 2, 0.1, Some(vec![0, 1]), 0).is_err());
        assert!(make_lock(3, 2, 0.1, Some(vec![0, 1, 2]), 0).is_err());
        assert!(matches!(make_lock(20, 2, 0.1, None, 0), Err(Error::SizeGuardExceeded { .. })));
    }

    #[test]
    fn distractors_keep_their_distance() {
        let inst = make_random_realizable(3, 2, 3, 12, 2, 11).unwrap();
        let exact = oracle::compute_exact_values(&inst.cdp).unwrap();
        let pts = reachable_points(&inst.cdp, &exact);
        let star = inst.class.star_id().unwrap();
        for f in &inst.class.members {
            if f.id != star {
                assert!(sup_gap(f, &inst.cdp, &pts) >= MIN_DISTRACTOR_GAP);
            }
        }
    }

    #[test]
    fn removing_q_star_breaks_realizability() {
        let inst = make_random_realizable(2, 2, 2, 6, 1, 5).unwrap();
        let star = inst.class.star_index.unwrap();
        let mut members = inst.class.members.clone();
        members.remove(star);
        let class = FunctionClass::new(members, None).unwrap();
        let report = validate_assumptions(&inst.cdp, &class).unwrap();
        assert!(!report.realizable.holds);
        assert!(report.reactive_q_star.holds);
    }
}
