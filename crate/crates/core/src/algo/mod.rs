//! The learner.
//!
//! [`Learner`] owns the per-run state: the episode meter, the random
//! streams, the cache of value predictions and the diagnostics. Its
//! subroutines are public so tests can drive them one at a time; [`lsvee`]
//! runs the whole algorithm and always returns a report, including when the
//! budget runs out halfway.

pub mod params;
pub mod report;

use std::collections::HashSet;

use rand::Rng;

use crate::cdp::{EpisodeMeter, LayeredCdp, Path, StateId};
use crate::error::{Error, Result};
use crate::funcclass::{mc_value_prediction, FunctionClass, QFunction, ValueCache};
use crate::rng::{RngStreams, StreamTag};

pub use params::{AlgoParams, Constants, ConstantsMode, Schedule};
pub use report::{EliminationRecord, EpisodeCounts, Event, Outcome, RunReport};

/// Builds the schedule for an environment/class pair.
pub fn compute_params(cdp: &LayeredCdp, class_size: usize, params: &AlgoParams) -> Schedule {
    Schedule::new(
        params.epsilon,
        params.delta,
        cdp.horizon(),
        cdp.num_actions(),
        params.max_states_per_level.unwrap_or_else(|| cdp.max_level_size()),
        class_size.max(1),
        params.constants(),
    )
}

#[derive(Debug, Default)]
struct Stats {
    episodes: EpisodeCounts,
    consensus_calls: usize,
    td_elim_calls: usize,
    dfs_calls: usize,
    td_elim_per_invocation: Vec<usize>,
    repeated_td_elim_states: usize,
    on_demand_iterations: usize,
    trace: Vec<EliminationRecord>,
}

/// Per-run learner state.
pub struct Learner<'a> {
    cdp: &'a LayeredCdp,
    schedule: Schedule,
    meter: EpisodeMeter,
    streams: RngStreams,
    cache: ValueCache,
    events: Vec<Event>,
    stats: Stats,
    survivors: Vec<usize>,
    dfs_depth: usize,
    invocation_states: HashSet<StateId>,
}

#[derive(Clone, Copy)]
enum Bucket {
    Consensus,
    TdElim,
    PolicyEval,
}

impl<'a> Learner<'a> {
    pub fn new(cdp: &'a LayeredCdp, schedule: Schedule, budget: Option<u64>, seed: u64) -> Self {
        Self {
            cdp,
            schedule,
            meter: EpisodeMeter::new(budget),
            streams: RngStreams::new(seed),
            cache: ValueCache::new(),
            events: Vec::new(),
            stats: Stats::default(),
            survivors: Vec::new(),
            dfs_depth: 0,
            invocation_states: HashSet::new(),
        }
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn cache(&self) -> &ValueCache {
        &self.cache
    }

    pub fn episodes_used(&self) -> u64 {
        self.meter.used()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Ids left after the most recent TD elimination.
    pub fn survivors(&self) -> &[usize] {
        &self.survivors
    }

    fn bill(&mut self, bucket: Bucket, before: u64) -> u64 {
        let spent = self.meter.used() - before;
        let counts = &mut self.stats.episodes;
        match bucket {
            Bucket::Consensus => counts.consensus += spent,
            Bucket::TdElim => counts.td_elim += spent,
            Bucket::PolicyEval => counts.mc_policy_eval += spent,
        }
        spent
    }

    /// Estimates every member's value prediction at `path` from `n_test`
    /// fresh observations, caches them, and reports whether their spread is
    /// within `eps_test`.
    pub fn consensus(&mut self, path: &Path, fs: &[QFunction], eps_test: f64, delta: f64) -> Result<bool> {
        if fs.is_empty() {
            return Err(Error::ClassEmptied { path: path.clone() });
        }
        self.stats.consensus_calls += 1;
        let n = self.schedule.n_test(delta);
        let mut rng = self.streams.stream(StreamTag::Consensus, path);
        let before = self.meter.used();
        let res = mc_value_prediction(self.cdp, path, fs, n, &mut rng, &mut self.meter, &mut self.cache);
        let spent = self.bill(Bucket::Consensus, before);
        let est = res?;
        let (lo, hi) = est.values().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let spread = hi - lo;
        let passed = spread <= eps_test;
        self.events.push(Event::Consensus {
            path: path.clone(),
            survivors: fs.len(),
            n_test: n,
            episodes: spent,
            total_episodes: self.meter.used(),
            eps_test,
            spread,
            passed,
        });
        Ok(passed)
    }

    /// Eliminates members whose empirical squared TD error at `path` is far
    /// above the best. Requires cached predictions at every non-terminal
    /// child for every member. Also caches the survivors' predictions at
    /// `path` itself.
    pub fn td_elim(&mut self, path: &Path, fs: Vec<QFunction>, delta: f64) -> Result<Vec<QFunction>> {
        if fs.is_empty() {
            return Err(Error::ClassEmptied { path: path.clone() });
        }
        let k = self.cdp.num_actions();
        let h = self.cdp.horizon();
        let state = self.cdp.resolve(path)?;
        let mut targets = vec![vec![0.0; k]; fs.len()];
        if path.len() + 1 < h {
            for a in 0..k {
                let child = path.child(a);
                for (row, f) in targets.iter_mut().zip(&fs) {
                    row[a] = self
                        .cache
                        .estimate(&child, f.id)
                        .ok_or(Error::MissingEstimate { path: child.clone(), function: f.id })?;
                }
            }
        }

        self.stats.td_elim_calls += 1;
        if self.dfs_depth > 0 {
            if let Some(last) = self.stats.td_elim_per_invocation.last_mut() {
                *last += 1;
            }
            if !self.invocation_states.insert(state) {
                self.stats.repeated_td_elim_states += 1;
            }
        }

        let n = self.schedule.n_train(delta);
        let mut rng = self.streams.stream(StreamTag::TdElim, path);
        let before = self.meter.used();
        let mut risks = vec![0.0; fs.len()];
        let mut preds = vec![0.0; fs.len()];
        let mut res = Ok(());
        for _ in 0..n {
            match self.cdp.sample_obs_then_act(path, &mut rng, &mut self.meter, |_, r| r.gen_range(0..k)) {
                Ok((x, a, r)) => {
                    for (i, f) in fs.iter().enumerate() {
                        let resid = f.eval(&x, a) - r - targets[i][a];
                        risks[i] += resid * resid;
                        preds[i] += f.greedy(&x, k).1;
                    }
                }
                Err(e) => {
                    res = Err(e);
                    break;
                }
            }
        }
        let spent = self.bill(Bucket::TdElim, before);
        res?;

        let nf = n as f64;
        risks.iter_mut().for_each(|r| *r /= nf);
        let min_risk = risks.iter().copied().fold(f64::INFINITY, f64::min);
        let threshold = self.schedule.threshold(delta, n);
        let before_ids: Vec<usize> = fs.iter().map(|f| f.id).collect();
        let mut kept = Vec::with_capacity(fs.len());
        for (i, f) in fs.into_iter().enumerate() {
            if risks[i] <= min_risk + threshold {
                self.cache.write(path, f.id, preds[i] / nf, n);
                kept.push(f);
            }
        }
        let after_ids: Vec<usize> = kept.iter().map(|f| f.id).collect();
        self.events.push(Event::TdElim {
            path: path.clone(),
            before: before_ids.len(),
            after: after_ids.len(),
            n_train: n,
            episodes: spent,
            total_episodes: self.meter.used(),
            threshold,
            min_risk,
        });
        self.stats.trace.push(EliminationRecord {
            path: path.clone(),
            state,
            invocation: self.stats.td_elim_per_invocation.len().saturating_sub(1),
            before: before_ids,
            after: after_ids.clone(),
            risks,
            threshold,
            n_train: n,
            f_star_survived: None,
        });
        self.survivors = after_ids;
        if kept.is_empty() {
            return Err(Error::ClassEmptied { path: path.clone() });
        }
        Ok(kept)
    }

    /// Depth-first learning from `path`: recurse into every child whose
    /// consensus test fails, then run TD elimination at `path`.
    pub fn dfs_learn(&mut self, path: &Path, fs: Vec<QFunction>, delta: f64) -> Result<Vec<QFunction>> {
        if self.dfs_depth == 0 {
            self.stats.td_elim_per_invocation.push(0);
            self.invocation_states.clear();
        }
        self.dfs_depth += 1;
        let res = self.dfs_inner(path, fs, delta);
        self.dfs_depth -= 1;
        res
    }

    fn dfs_inner(&mut self, path: &Path, mut fs: Vec<QFunction>, delta: f64) -> Result<Vec<QFunction>> {
        self.stats.dfs_calls += 1;
        let h = self.cdp.horizon();
        let eps_test = self.schedule.eps_test(path.len());
        let cons_delta = self.schedule.consensus_delta(delta);
        for a in 0..self.cdp.num_actions() {
            let child = path.child(a);
            if child.len() < h && !self.consensus(&child, &fs, eps_test, cons_delta)? {
                fs = self.dfs_inner(&child, fs, delta)?;
            }
        }
        let td_delta = self.schedule.td_elim_delta(delta);
        self.td_elim(path, fs, td_delta)
    }

    /// Checks the lowest-id survivor's greedy policy against `v_hat_star`
    /// by Monte-Carlo; on failure trains on the prefixes of the sampled
    /// trajectories and tries again. Returns the id of the accepted member.
    pub fn explore_on_demand(&mut self, mut fs: Vec<QFunction>, v_hat_star: f64, delta: f64) -> Result<usize> {
        let k = self.cdp.num_actions();
        let n1 = self.schedule.n1(delta);
        let n2 = self.schedule.n2(delta);
        let dfs_delta = self.schedule.on_demand_dfs_delta(delta, n2);
        let guard = self.schedule.iteration_guard();
        loop {
            if self.stats.on_demand_iterations >= guard {
                return Err(Error::IterationGuardExceeded { limit: guard });
            }
            self.stats.on_demand_iterations += 1;
            let f = fs.iter().min_by_key(|f| f.id).ok_or(Error::ClassEmptied { path: Path::root() })?.clone();

            let mut rng = self.streams.stream(StreamTag::PolicyEval, &[]);
            let before = self.meter.used();
            let mut total = 0.0;
            let mut prefixes = Vec::new();
            let mut res = Ok(());
            for i in 0..n1 {
                match self.cdp.run_episode_with(&mut rng, &mut self.meter, |x, _| f.greedy_action(x, k)) {
                    Ok(t) => {
                        total += t.total_reward;
                        if i < n2 {
                            prefixes.push(t.actions());
                        }
                    }
                    Err(e) => {
                        res = Err(e);
                        break;
                    }
                }
            }
            let spent = self.bill(Bucket::PolicyEval, before);
            res?;
            let v_hat = total / n1 as f64;
            let passed = (v_hat - v_hat_star).abs() <= self.schedule.eps_demand();
            self.events.push(Event::OnDemand {
                iteration: self.stats.on_demand_iterations,
                function_id: f.id,
                n1,
                episodes: spent,
                total_episodes: self.meter.used(),
                v_hat,
                v_hat_star,
                passed,
            });
            if passed {
                return Ok(f.id);
            }
            for traj in &prefixes {
                for prefix in traj.proper_prefixes() {
                    fs = self.dfs_learn(&prefix, fs, dfs_delta)?;
                }
            }
        }
    }

    /// Runs the full algorithm.
    pub fn run(mut self, class: &FunctionClass, seed: u64) -> (RunReport, Vec<Event>) {
        self.survivors = class.members.iter().map(|f| f.id).collect();
        let delta = self.schedule.delta;
        let mut v_hat_star = None;
        let result = (|| {
            let root = Path::root();
            let fs = self.dfs_learn(&root, class.members.clone(), delta / 2.0)?;
            let lowest = fs.iter().map(|f| f.id).min().ok_or(Error::ClassEmptied { path: root.clone() })?;
            let v = self
                .cache
                .estimate(&root, lowest)
                .ok_or(Error::MissingEstimate { path: root.clone(), function: lowest })?;
            v_hat_star = Some(v);
            self.explore_on_demand(fs, v, delta / 2.0)
        })();
        let (outcome, returned, error) = match result {
            Ok(id) => (Outcome::Success, Some(id), None),
            Err(e) => {
                let outcome = match e {
                    Error::BudgetExceeded { .. } => Outcome::BudgetExceeded,
                    Error::ClassEmptied { .. } => Outcome::ClassEmptied,
                    Error::IterationGuardExceeded { .. } => Outcome::IterationGuardExceeded,
                    _ => Outcome::Failed,
                };
                (outcome, None, Some(e.to_string()))
            }
        };
        let mut episodes = self.stats.episodes;
        episodes.total = self.meter.used();
        let report = RunReport {
            seed,
            outcome,
            error,
            returned_function_id: returned,
            v_hat_star,
            episodes,
            consensus_calls: self.stats.consensus_calls,
            td_elim_calls: self.stats.td_elim_calls,
            dfs_calls: self.stats.dfs_calls,
            dfs_invocations: self.stats.td_elim_per_invocation.len(),
            td_elim_per_invocation: self.stats.td_elim_per_invocation,
            repeated_td_elim_states: self.stats.repeated_td_elim_states,
            on_demand_iterations: self.stats.on_demand_iterations,
            survivors: self.survivors,
            survivor_trace: self.stats.trace,
            schedule: self.schedule,
        };
        (report, self.events)
    }
}

/// Runs the learner on `cdp` with class `class`. When the class marks Q*,
/// the elimination trace is annotated with its survival.
pub fn lsvee(cdp: &LayeredCdp, class: &FunctionClass, params: &AlgoParams, seed: u64) -> (RunReport, Vec<Event>) {
    let schedule = compute_params(cdp, class.len(), params);
    let learner = Learner::new(cdp, schedule, params.budget, seed);
    let (mut report, events) = learner.run(class, seed);
    if let Some(star) = class.star_id() {
        report.annotate_star(star);
    }
    (report, events)
}
