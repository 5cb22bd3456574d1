//! Layered contextual decision processes with deterministic transitions.
//!
//! States are grouped into levels `1..=H`; every action moves from level `h`
//! to level `h + 1`, and level `H + 1` is the terminal pseudo-state. Each state
//! carries a finite distribution over observations, and each observation a
//! reward specification per action. Sampling always goes through an
//! [`EpisodeMeter`]: one draw from the root is one episode.

mod document;

use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use document::CdpDocument;

const PROB_TOLERANCE: f64 = 1e-12;

/// A latent state. Levels are 1-based; level `H + 1` is terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId {
    pub level: usize,
    pub index: usize,
}

impl StateId {
    pub fn new(level: usize, index: usize) -> Self {
        Self { level, index }
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}.{}", self.level, self.index)
    }
}

/// An action sequence from the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(pub Vec<usize>);

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn child(&self, action: usize) -> Path {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(action);
        Path(v)
    }

    /// Nonempty proper prefixes, shortest first.
    pub fn proper_prefixes(&self) -> impl Iterator<Item = Path> + '_ {
        (1..self.0.len()).map(move |n| Path(self.0[..n].to_vec()))
    }

    pub fn is_prefix_of(&self, other: &[usize]) -> bool {
        other.starts_with(&self.0)
    }
}

impl Deref for Path {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Path {
    fn from(v: Vec<usize>) -> Self {
        Path(v)
    }
}

impl From<&[usize]> for Path {
    fn from(v: &[usize]) -> Self {
        Path(v.to_vec())
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// A point of the observation space.
///
/// `token` identifies the point; two draws with the same token are the same
/// observation. Environments that reveal the action history attach it in
/// `history` when the observation is emitted; it is never part of the stored
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub token: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(skip)]
    pub history: Option<Path>,
}

impl Observation {
    pub fn token(token: u64) -> Self {
        Self { token, features: None, history: None }
    }

    pub fn with_features(token: u64, features: Vec<f64>) -> Self {
        Self { token, features: Some(features), history: None }
    }

    pub fn history(&self) -> &[usize] {
        self.history.as_deref().unwrap_or(&[])
    }
}

/// Reward for one (observation, action) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum RewardSpec {
    Deterministic { value: f64 },
    Bernoulli { mean: f64 },
}

impl RewardSpec {
    pub fn zero() -> Self {
        RewardSpec::Deterministic { value: 0.0 }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RewardSpec::Deterministic { value } => value,
            RewardSpec::Bernoulli { mean } => mean,
        }
    }

    /// Largest value a draw can take.
    pub fn max_realized(&self) -> f64 {
        match *self {
            RewardSpec::Deterministic { value } => value,
            RewardSpec::Bernoulli { mean } if mean > 0.0 => 1.0,
            RewardSpec::Bernoulli { .. } => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardSpec::Deterministic { value } => value,
            RewardSpec::Bernoulli { mean } => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One support point of a state's observation/reward distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub observation: Observation,
    pub prob: f64,
    pub rewards: Vec<RewardSpec>,
}

impl SupportPoint {
    pub fn mean_reward(&self, action: usize) -> f64 {
        self.rewards[action].mean()
    }
}

/// Finite distribution over observation/reward pairs attached to a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsRewardDist {
    support: Vec<SupportPoint>,
    cumulative: Vec<f64>,
}

impl ObsRewardDist {
    pub fn new(support: Vec<SupportPoint>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidCdp("empty observation support".into()));
        }
        let mut seen = HashSet::new();
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(support.len());
        for pt in &support {
            if !(pt.prob >= 0.0 && pt.prob <= 1.0) {
                return Err(Error::InvalidCdp(format!("probability {} out of [0,1]", pt.prob)));
            }
            if !seen.insert(pt.observation.token) {
                return Err(Error::InvalidCdp(format!(
                    "token {} repeated within one support",
                    pt.observation.token
                )));
            }
            for r in &pt.rewards {
                let m = r.mean();
                if !(0.0..=1.0).contains(&m) {
                    return Err(Error::InvalidCdp(format!("reward mean {m} out of [0,1]")));
                }
            }
            acc += pt.prob;
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidCdp(format!("probabilities sum to {acc}, not 1")));
        }
        Ok(Self { support, cumulative })
    }

    /// Point mass on a single observation.
    pub fn point(observation: Observation, rewards: Vec<RewardSpec>) -> Self {
        Self {
            support: vec![SupportPoint { observation, prob: 1.0, rewards }],
            cumulative: vec![1.0],
        }
    }

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.support.len() == 1 {
            return 0;
        }
        let u: f64 = rng.gen();
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.support.len() - 1)
    }
}

/// A reactive policy: maps the current observation to an action.
pub trait Policy {
    fn act(&self, x: &Observation) -> usize;
}

impl<F: Fn(&Observation) -> usize> Policy for F {
    fn act(&self, x: &Observation) -> usize {
        self(x)
    }
}

/// Counts episodes and enforces an optional cap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeMeter {
    used: u64,
    budget: Option<u64>,
}

impl EpisodeMeter {
    pub fn new(budget: Option<u64>) -> Self {
        Self { used: 0, budget }
    }

    pub fn unlimited() -> Self {
        Self::new(None)
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn remaining(&self) -> Option<u64> {
        self.budget.map(|b| b.saturating_sub(self.used))
    }

    /// Accounts for one root traversal.
    pub fn charge(&mut self) -> Result<()> {
        if let Some(budget) = self.budget {
            if self.used >= budget {
                return Err(Error::BudgetExceeded { budget });
            }
        }
        self.used += 1;
        Ok(())
    }
}

/// One step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: StateId,
    pub observation: Observation,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub total_reward: f64,
}

impl Trajectory {
    pub fn actions(&self) -> Path {
        Path(self.steps.iter().map(|s| s.action).collect())
    }
}

/// The environment: layered states, a deterministic transition table and one
/// observation/reward distribution per state. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CdpDocument", into = "CdpDocument")]
pub struct LayeredCdp {
    horizon: usize,
    num_actions: usize,
    level_sizes: Vec<usize>,
    start: usize,
    // transitions[h - 1][index][action] = index at level h + 1, for h < H
    transitions: Vec<Vec<Vec<usize>>>,
    // observations[h - 1][index]
    observations: Vec<Vec<ObsRewardDist>>,
    reveal_history: bool,
}

impl LayeredCdp {
    /// Builds and validates an environment.
    ///
    /// `transitions` has one entry per level `1..H` (level `H` always moves
    /// to the terminal state). Fails on a malformed table, a bad distribution,
    /// or when some action sequence can collect more than 1 in total reward.
    pub fn new(
        horizon: usize,
        num_actions: usize,
        level_sizes: Vec<usize>,
        start: usize,
        transitions: Vec<Vec<Vec<usize>>>,
        observations: Vec<Vec<ObsRewardDist>>,
        reveal_history: bool,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidCdp(m));
        if horizon == 0 || num_actions == 0 {
            return bad("horizon and action count must be positive".into());
        }
        if level_sizes.len() != horizon || level_sizes.contains(&0) {
            return bad(format!("need {horizon} nonempty levels, got {level_sizes:?}"));
        }
        if start >= level_sizes[0] {
            return bad(format!("start index {start} out of range"));
        }
        if transitions.len() != horizon - 1 {
            return bad(format!(
                "expected transitions for {} levels, got {}",
                horizon - 1,
                transitions.len()
            ));
        }
        for (h, level) in transitions.iter().enumerate() {
            if level.len() != level_sizes[h] {
                return bad(format!("level {} transition rows: {} != {}", h + 1, level.len(), level_sizes[h]));
            }
            for (i, row) in level.iter().enumerate() {
                if row.len() != num_actions {
                    return bad(format!("state s{}.{i} has {} actions", h + 1, row.len()));
                }
                if let Some(&n) = row.iter().find(|&&n| n >= level_sizes[h + 1]) {
                    return bad(format!("s{}.{i} transitions to missing index {n}", h + 1));
                }
            }
        }
        if observations.len() != horizon {
            return bad("one observation table per level required".into());
        }
        for (h, level) in observations.iter().enumerate() {
            if level.len() != level_sizes[h] {
                return bad(format!("level {} has {} distributions", h + 1, level.len()));
            }
            for dist in level {
                if dist.support.iter().any(|pt| pt.rewards.len() != num_actions) {
                    return bad("every support point needs one reward per action".into());
                }
            }
        }
        let cdp = Self {
            horizon,
            num_actions,
            level_sizes,
            start,
            transitions,
            observations,
            reveal_history,
        };
        let max_total = cdp.max_total_reward();
        if max_total > 1.0 + PROB_TOLERANCE {
            return bad(format!("an action sequence can collect total reward {max_total} > 1"));
        }
        Ok(cdp)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    /// Widest level, the `M` of the model.
    pub fn max_level_size(&self) -> usize {
        self.level_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn num_states(&self) -> usize {
        self.level_sizes.iter().sum()
    }

    pub fn reveals_history(&self) -> bool {
        self.reveal_history
    }

    pub fn start(&self) -> StateId {
        StateId::new(1, self.start)
    }

    pub fn terminal(&self) -> StateId {
        StateId::new(self.horizon + 1, 0)
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        s.level > self.horizon
    }

    /// All non-terminal states, level by level.
    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.level_sizes
            .iter()
            .enumerate()
            .flat_map(|(h, &m)| (0..m).map(move |i| StateId::new(h + 1, i)))
    }

    pub fn states_at(&self, level: usize) -> impl Iterator<Item = StateId> {
        let m = self.level_sizes.get(level.wrapping_sub(1)).copied().unwrap_or(0);
        (0..m).map(move |i| StateId::new(level, i))
    }

    /// Successor of a non-terminal state.
    pub fn next(&self, s: StateId, action: usize) -> StateId {
        debug_assert!(s.level >= 1 && s.level <= self.horizon);
        if s.level == self.horizon {
            self.terminal()
        } else {
            StateId::new(s.level + 1, self.transitions[s.level - 1][s.index][action])
        }
    }

    pub fn dist(&self, s: StateId) -> &ObsRewardDist {
        &self.observations[s.level - 1][s.index]
    }

    /// State reached by executing `path` from the start state.
    pub fn resolve(&self, path: &[usize]) -> Result<StateId> {
        if path.len() > self.horizon {
            return Err(Error::PathTooLong { path: path.into(), len: path.len(), max: self.horizon });
        }
        let mut s = self.start();
        for &a in path {
            if a >= self.num_actions {
                return Err(Error::InvalidAction { action: a, num_actions: self.num_actions });
            }
            s = self.next(s, a);
        }
        Ok(s)
    }

    /// The observation an agent sees at the end of `path` for a given support point.
    pub fn emit(&self, point: &SupportPoint, path: &[usize]) -> Observation {
        let mut x = point.observation.clone();
        if self.reveal_history {
            x.history = Some(path.into());
        }
        x
    }

    /// Rolls in along `path` and draws `(x, r)` from the state it reaches.
    /// Costs one episode.
    pub fn sample_obs_reward<R: Rng + ?Sized>(
        &self,
        path: &[usize],
        rng: &mut R,
        meter: &mut EpisodeMeter,
    ) -> Result<(Observation, Vec<f64>)> {
        let (x, point) = self.sample_point(path, rng, meter)?;
        let rewards = point.rewards.iter().map(|r| r.sample(rng)).collect();
        Ok((x, rewards))
    }

    /// Rolls in along `path` and draws only the observation. Costs one episode.
    pub fn sample_observation<R: Rng + ?Sized>(
        &self,
        path: &[usize],
        rng: &mut R,
        meter: &mut EpisodeMeter,
    ) -> Result<Observation> {
        Ok(self.sample_point(path, rng, meter)?.0)
    }

    /// Like [`sample_obs_reward`](Self::sample_obs_reward) but only realizes
    /// the reward of `action`, chosen after seeing the observation.
    pub fn sample_obs_then_act<R: Rng + ?Sized>(
        &self,
        path: &[usize],
        rng: &mut R,
        meter: &mut EpisodeMeter,
        choose: impl FnOnce(&Observation, &mut R) -> usize,
    ) -> Result<(Observation, usize, f64)> {
        let (x, point) = self.sample_point(path, rng, meter)?;
        let a = choose(&x, rng);
        if a >= self.num_actions {
            return Err(Error::InvalidAction { action: a, num_actions: self.num_actions });
        }
        let r = point.rewards[a].sample(rng);
        Ok((x, a, r))
    }

    fn sample_point<R: Rng + ?Sized>(
        &self,
        path: &[usize],
        rng: &mut R,
        meter: &mut EpisodeMeter,
    ) -> Result<(Observation, &SupportPoint)> {
        if path.len() >= self.horizon {
            return Err(Error::PathTooLong { path: path.into(), len: path.len(), max: self.horizon - 1 });
        }
        let s = self.resolve(path)?;
        meter.charge()?;
        let dist = self.dist(s);
        let point = &dist.support[dist.sample_index(rng)];
        Ok((self.emit(point, path), point))
    }

    /// Runs one full episode under a reactive policy.
    pub fn run_episode<R: Rng + ?Sized>(
        &self,
        policy: &dyn Policy,
        rng: &mut R,
        meter: &mut EpisodeMeter,
    ) -> Result<Trajectory> {
        self.run_episode_with(rng, meter, |x, _| policy.act(x))
    }

    /// Runs one full episode where the caller chooses actions, possibly at random.
    pub fn run_episode_with<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        meter: &mut EpisodeMeter,
        mut choose: impl FnMut(&Observation, &mut R) -> usize,
    ) -> Result<Trajectory> {
        meter.charge()?;
        let mut s = self.start();
        let mut path = Vec::with_capacity(self.horizon);
        let mut steps = Vec::with_capacity(self.horizon);
        let mut total = 0.0;
        while !self.is_terminal(s) {
            let dist = self.dist(s);
            let point = &dist.support[dist.sample_index(rng)];
            let x = self.emit(point, &path);
            let a = choose(&x, rng);
            if a >= self.num_actions {
                return Err(Error::InvalidAction { action: a, num_actions: self.num_actions });
            }
            let r = point.rewards[a].sample(rng);
            total += r;
            steps.push(Step { state: s, observation: x, action: a, reward: r });
            path.push(a);
            s = self.next(s, a);
        }
        Ok(Trajectory { steps, total_reward: total })
    }

    /// `reachable[h - 1][i]` is true when state `s_{h.i}` can be reached from
    /// the start state with positive probability.
    pub fn reachable(&self) -> Vec<Vec<bool>> {
        let mut reach: Vec<Vec<bool>> = self.level_sizes.iter().map(|&m| vec![false; m]).collect();
        reach[0][self.start] = true;
        for h in 0..self.horizon.saturating_sub(1) {
            for i in 0..self.level_sizes[h] {
                if reach[h][i] {
                    for &n in &self.transitions[h][i] {
                        reach[h + 1][n] = true;
                    }
                }
            }
        }
        reach
    }

    pub fn reachable_states(&self) -> Vec<StateId> {
        let reach = self.reachable();
        self.states().filter(|s| reach[s.level - 1][s.index]).collect()
    }

    /// Largest total reward any action sequence can realize.
    pub fn max_total_reward(&self) -> f64 {
        let mut below = vec![0.0; 1];
        for h in (1..=self.horizon).rev() {
            let mut here = vec![0.0; self.level_sizes[h - 1]];
            for (i, v) in here.iter_mut().enumerate() {
                let s = StateId::new(h, i);
                let mut best: f64 = 0.0;
                for pt in self.dist(s).support.iter().filter(|pt| pt.prob > 0.0) {
                    for a in 0..self.num_actions {
                        let next = self.next(s, a);
                        let tail = if self.is_terminal(next) { 0.0 } else { below[next.index] };
                        best = best.max(pt.rewards[a].max_realized() + tail);
                    }
                }
                *v = best;
            }
            below = here;
        }
        below[self.start]
    }

    pub(crate) fn transitions_raw(&self) -> &[Vec<Vec<usize>>] {
        &self.transitions
    }

    pub(crate) fn start_index(&self) -> usize {
        self.start
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
