//! Exact dynamic programming over the (small) deterministic tree.
//!
//! Every quantity here is an exact sum over the declared finite supports; no
//! sampling. These are the ground truth for all statistical checks.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cdp::{LayeredCdp, Path, Policy, StateId};
use crate::error::{Error, Result};
use crate::funcclass::{FunctionClass, QFunction};

/// Upper bound on elementary operations an oracle call may perform.
pub const SIZE_GUARD: u64 = 10_000_000;

/// Rejects environments too large to enumerate.
///
/// State-reactive environments cost `Σ_h M_h · K · maxSupport`. Environments
/// that reveal the action history must be walked path by path, which costs
/// `Σ_h K^h · K · maxSupport`.
pub fn check_size(cdp: &LayeredCdp) -> Result<u64> {
    let k = cdp.num_actions() as u64;
    let support = cdp.states().map(|s| cdp.dist(s).support().len()).max().unwrap_or(1) as u64;
    let mut work: u64 = 0;
    let mut width: u64 = 1;
    for &m in cdp.level_sizes() {
        let nodes = if cdp.reveals_history() { width } else { m as u64 };
        work = work.saturating_add(nodes.saturating_mul(k).saturating_mul(support));
        width = width.saturating_mul(k);
    }
    if work > SIZE_GUARD {
        return Err(Error::SizeGuardExceeded { work, limit: SIZE_GUARD });
    }
    Ok(work)
}

/// Optimal state values and Q-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExactValues {
    /// `v_star[h - 1][i]` for levels `1..=H`; the terminal value is 0.
    pub v_star: Vec<Vec<f64>>,
    /// `Q*_s(x, ·)` keyed by state and observation token.
    #[serde(with = "q_table_serde")]
    pub q_star: HashMap<(StateId, u64), Vec<f64>>,
}

impl ExactValues {
    pub fn v(&self, s: StateId) -> f64 {
        if s.level > self.v_star.len() {
            0.0
        } else {
            self.v_star[s.level - 1][s.index]
        }
    }

    pub fn q(&self, s: StateId, token: u64) -> Option<&[f64]> {
        self.q_star.get(&(s, token)).map(Vec::as_slice)
    }

    /// `V*` at the start state.
    pub fn root_value(&self, cdp: &LayeredCdp) -> f64 {
        self.v(cdp.start())
    }

    /// Q* as a token-keyed table. Fails when two reachable states share a
    /// token but disagree on Q*, i.e. when Q* is not reactive.
    pub fn q_star_function(&self, cdp: &LayeredCdp, id: usize) -> Result<QFunction> {
        let mut values: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for s in cdp.reachable_states() {
            for pt in cdp.dist(s).support() {
                let token = pt.observation.token;
                let row = &self.q_star[&(s, token)];
                if let Some(prev) = values.get(&token) {
                    if prev.iter().zip(row).any(|(a, b)| (a - b).abs() > 1e-9) {
                        return Err(Error::Unsupported(format!("Q* is not reactive on token {token}")));
                    }
                } else {
                    values.insert(token, row.clone());
                }
            }
        }
        Ok(QFunction::table(id, values))
    }
}

mod q_table_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    type QTable = HashMap<(StateId, u64), Vec<f64>>;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        state: StateId,
        token: u64,
        values: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(map: &QTable, ser: S) -> Result<S::Ok, S::Error> {
        let mut rows: Vec<Entry> =
            map.iter().map(|(&(state, token), v)| Entry { state, token, values: v.clone() }).collect();
        rows.sort_by_key(|e| (e.state, e.token));
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<QTable, D::Error> {
        let rows = Vec::<Entry>::deserialize(de)?;
        Ok(rows.into_iter().map(|e| ((e.state, e.token), e.values)).collect())
    }
}

/// Backward induction for `V*` and `Q*`.
///
/// `Q*_s(x, a) = E[r(a) | x] + V*(Γ(s, a))` and `V*(s) = E_x max_a Q*_s(x, a)`.
pub fn compute_exact_values(cdp: &LayeredCdp) -> Result<ExactValues> {
    check_size(cdp)?;
    let h_max = cdp.horizon();
    let k = cdp.num_actions();
    let mut v_star: Vec<Vec<f64>> = cdp.level_sizes().iter().map(|&m| vec![0.0; m]).collect();
    let mut q_star = HashMap::new();
    for h in (1..=h_max).rev() {
        for s in cdp.states_at(h) {
            let mut v = 0.0;
            for pt in cdp.dist(s).support() {
                let row: Vec<f64> = (0..k)
                    .map(|a| {
                        let next = cdp.next(s, a);
                        let tail = if cdp.is_terminal(next) { 0.0 } else { v_star[next.level - 1][next.index] };
                        pt.mean_reward(a) + tail
                    })
                    .collect();
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                v += pt.prob * best;
                q_star.insert((s, pt.observation.token), row);
            }
            v_star[h - 1][s.index] = v;
        }
    }
    Ok(ExactValues { v_star, q_star })
}

/// Joint recursion for a policy's value and its probability of visiting a
/// state outside `learned` (when given). Memoized by state unless the
/// environment reveals history, in which case the path tree is walked.
struct PolicyWalk<'a> {
    cdp: &'a LayeredCdp,
    policy: &'a dyn Policy,
    learned: Option<&'a HashSet<StateId>>,
    memo: HashMap<StateId, (f64, f64)>,
}

impl PolicyWalk<'_> {
    fn walk(&mut self, s: StateId, path: &mut Vec<usize>) -> (f64, f64) {
        if self.cdp.is_terminal(s) {
            return (0.0, 0.0);
        }
        let memoize = !self.cdp.reveals_history();
        if memoize {
            if let Some(&hit) = self.memo.get(&s) {
                return hit;
            }
        }
        let (mut value, mut exit) = (0.0, 0.0);
        for pt in self.cdp.dist(s).support() {
            let x = self.cdp.emit(pt, path);
            let a = self.policy.act(&x);
            let next = self.cdp.next(s, a);
            path.push(a);
            let (v, q) = self.walk(next, path);
            path.pop();
            value += pt.prob * (pt.mean_reward(a) + v);
            exit += pt.prob * q;
        }
        if let Some(l) = self.learned {
            if !l.contains(&s) {
                exit = 1.0;
            }
        }
        if memoize {
            self.memo.insert(s, (value, exit));
        }
        (value, exit)
    }
}

fn walk_from_root(cdp: &LayeredCdp, policy: &dyn Policy, learned: Option<&HashSet<StateId>>) -> Result<(f64, f64)> {
    check_size(cdp)?;
    let mut w = PolicyWalk { cdp, policy, learned, memo: HashMap::new() };
    Ok(w.walk(cdp.start(), &mut Vec::with_capacity(cdp.horizon())))
}

/// Exact `V(π)` from the start state.
pub fn policy_value_exact(cdp: &LayeredCdp, policy: &dyn Policy) -> Result<f64> {
    Ok(walk_from_root(cdp, policy, None)?.0)
}

/// Exact `V(s, π)` for every state, for state-reactive environments.
pub fn policy_state_values(cdp: &LayeredCdp, policy: &dyn Policy) -> Result<Vec<Vec<f64>>> {
    if cdp.reveals_history() {
        return Err(Error::Unsupported("per-state values need observations that do not carry history".into()));
    }
    check_size(cdp)?;
    let mut w = PolicyWalk { cdp, policy, learned: None, memo: HashMap::new() };
    let mut out: Vec<Vec<f64>> = cdp.level_sizes().iter().map(|&m| vec![0.0; m]).collect();
    for s in cdp.states() {
        out[s.level - 1][s.index] = w.walk(s, &mut Vec::new()).0;
    }
    Ok(out)
}

/// Exact `V^f(p, π_f) = E_{x ~ D_p} f(x, π_f(x))`; 0 at `|p| = H`.
pub fn value_prediction_exact(cdp: &LayeredCdp, path: &Path, f: &QFunction) -> Result<f64> {
    check_size(cdp)?;
    let s = cdp.resolve(path)?;
    if cdp.is_terminal(s) {
        return Ok(0.0);
    }
    let k = cdp.num_actions();
    Ok(cdp.dist(s).support().iter().map(|pt| pt.prob * f.greedy(&cdp.emit(pt, path), k).1).sum())
}

/// Best member of `class` by exact policy value; lowest id on ties.
pub fn brute_force_policy_search(cdp: &LayeredCdp, class: &FunctionClass) -> Result<(usize, f64)> {
    let k = cdp.num_actions();
    let mut best: Option<(usize, f64)> = None;
    for f in &class.members {
        let v = policy_value_exact(cdp, &f.policy(k))?;
        best = match best {
            Some((id, bv)) if bv > v || (bv == v && id < f.id) => Some((id, bv)),
            _ => Some((f.id, v)),
        };
    }
    best.ok_or_else(|| Error::InvalidClass("empty function class".into()))
}

/// Suboptimality `V* − V(π_f)` and the probability that `π_f` visits a state
/// outside `learned`.
pub fn learned_set_risk(
    cdp: &LayeredCdp,
    exact: &ExactValues,
    f: &QFunction,
    learned: &HashSet<StateId>,
) -> Result<(f64, f64)> {
    let (value, exit) = walk_from_root(cdp, &f.policy(cdp.num_actions()), Some(learned))?;
    Ok((exact.root_value(cdp) - value, exit))
}

/// `V^{f*}(s, π_f) = E_{x ~ D_s} Q*_s(x, π_f(x))`.
pub fn star_value_under(cdp: &LayeredCdp, exact: &ExactValues, s: StateId, f: &QFunction) -> f64 {
    let k = cdp.num_actions();
    cdp.dist(s)
        .support()
        .iter()
        .map(|pt| {
            let a = f.greedy_action(&pt.observation, k);
            pt.prob * exact.q_star[&(s, pt.observation.token)][a]
        })
        .sum()
}

/// States where every member's greedy action loses little against Q*:
///
/// `max_f V*(s) − V^{f*}(s, π_f) ≤ 4φ√(2K) + 2φ + 40(H − h)√K φ`.
pub fn learned_set(cdp: &LayeredCdp, exact: &ExactValues, members: &[QFunction], phi: f64) -> Result<HashSet<StateId>> {
    if cdp.reveals_history() {
        return Err(Error::Unsupported("learned sets need observations that do not carry history".into()));
    }
    check_size(cdp)?;
    let k = cdp.num_actions() as f64;
    let h_max = cdp.horizon() as f64;
    let mut out = HashSet::new();
    for s in cdp.states() {
        let slack = 4.0 * phi * (2.0 * k).sqrt() + 2.0 * phi + 40.0 * (h_max - s.level as f64) * k.sqrt() * phi;
        let worst = members
            .iter()
            .map(|f| exact.v(s) - star_value_under(cdp, exact, s, f))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst <= slack {
            out.insert(s);
        }
    }
    Ok(out)
}

/// Largest violation of `Q*_s(x, a) = E r(a) + E_{x' ~ D_{Γ(s,a)}} max_a' Q*_{Γ(s,a)}(x', a')`
/// over reachable `(s, x, a)`.
pub fn q_consistency_violation(cdp: &LayeredCdp, exact: &ExactValues) -> f64 {
    let k = cdp.num_actions();
    let mut worst: f64 = 0.0;
    for s in cdp.reachable_states() {
        for pt in cdp.dist(s).support() {
            let row = &exact.q_star[&(s, pt.observation.token)];
            for (a, &q) in row.iter().enumerate().take(k) {
                let next = cdp.next(s, a);
                let tail: f64 = if cdp.is_terminal(next) {
                    0.0
                } else {
                    cdp.dist(next)
                        .support()
                        .iter()
                        .map(|np| {
                            let r = &exact.q_star[&(next, np.observation.token)];
                            np.prob * r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                        })
                        .sum()
                };
                worst = worst.max((q - pt.mean_reward(a) - tail).abs());
            }
        }
    }
    worst
}
