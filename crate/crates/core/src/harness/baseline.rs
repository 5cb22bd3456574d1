//! Reference methods for episode-count comparisons.

use std::collections::HashMap;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_results_csv, ExperimentConfig, HarnessError, HarnessResult, ResultRow, Scorer};
use crate::algo::{self, Outcome};
use crate::cdp::{EpisodeMeter, LayeredCdp};
use crate::error::{Error, Result};
use crate::funcclass::{argmax, FunctionClass, TabularPolicy};
use crate::rng::{RngStreams, StreamTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Baseline {
    EnumerateAll,
    EpsilonGreedy,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::EnumerateAll => "enumerateAll",
            Baseline::EpsilonGreedy => "epsilonGreedy",
        }
    }
}

impl FromStr for Baseline {
    type Err = HarnessError;

    fn from_str(s: &str) -> HarnessResult<Self> {
        match s {
            "enumerateAll" | "enumerate-all" => Ok(Baseline::EnumerateAll),
            "epsilonGreedy" | "epsilon-greedy" => Ok(Baseline::EpsilonGreedy),
            other => Err(HarnessError::Config(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Evaluates every member's greedy policy with `n1` episodes and returns the
/// id with the best empirical value (lowest id on ties) and that value.
pub fn enumerate_all(
    cdp: &LayeredCdp,
    class: &FunctionClass,
    n1: u64,
    seed: u64,
    meter: &mut EpisodeMeter,
) -> Result<(usize, f64)> {
    let k = cdp.num_actions();
    let mut streams = RngStreams::new(seed);
    let mut best: Option<(usize, f64)> = None;
    for f in &class.members {
        let mut rng = streams.stream(StreamTag::Baseline, &[f.id]);
        let mut total = 0.0;
        for _ in 0..n1 {
            total += cdp.run_episode_with(&mut rng, meter, |x, _| f.greedy_action(x, k))?.total_reward;
        }
        let v = total / n1 as f64;
        let better = match best {
            None => true,
            Some((id, bv)) => v > bv || (v == bv && f.id < id),
        };
        if better {
            best = Some((f.id, v));
        }
    }
    best.ok_or_else(|| Error::InvalidClass("empty class".into()))
}

/// Tabular Q-learning keyed by observation token with ε-greedy exploration.
/// Each episode is replayed backwards with step size 1/n(x, a). Runs until
/// the meter is exhausted and returns the greedy table policy.
pub fn epsilon_greedy(cdp: &LayeredCdp, explore: f64, seed: u64, meter: &mut EpisodeMeter) -> TabularPolicy {
    let k = cdp.num_actions();
    let mut q: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut counts: HashMap<(u64, usize), u64> = HashMap::new();
    let mut rng = RngStreams::new(seed).stream(StreamTag::Baseline, &[]);
    loop {
        let traj = cdp.run_episode_with(&mut rng, meter, |x, r| {
            if r.gen::<f64>() < explore {
                r.gen_range(0..k)
            } else {
                q.get(&x.token).map_or(0, |row| argmax(row).0)
            }
        });
        let Ok(traj) = traj else { break };
        let mut next_value = 0.0;
        for step in traj.steps.iter().rev() {
            let tok = step.observation.token;
            let n = counts.entry((tok, step.action)).or_insert(0);
            *n += 1;
            let row = q.entry(tok).or_insert_with(|| vec![0.0; k]);
            let target = step.reward + next_value;
            row[step.action] += (target - row[step.action]) / *n as f64;
            next_value = argmax(row).1;
        }
    }
    TabularPolicy { actions: q.iter().map(|(&t, row)| (t, argmax(row).0)).collect(), default: 0 }
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub row: ResultRow,
    /// Episodes LSVEE used on the same seed when the budget was matched.
    pub matched_lsvee_episodes: Option<u64>,
}

/// Runs `baseline` on every seed of `config`. `epsilonGreedy` gets the
/// number of episodes LSVEE used on the same seed.
pub fn run_baseline(config: &ExperimentConfig, baseline: Baseline) -> HarnessResult<Vec<BaselineRun>> {
    config.validate()?;
    let params = config.effective_params();
    let runs: Vec<BaselineRun> = config
        .seeds
        .par_iter()
        .map(|&seed| -> HarnessResult<BaselineRun> {
            let inst = config.env.build(seed)?;
            let scorer = Scorer::new(&inst.cdp);
            let start = Instant::now();
            let (episodes, outcome, subopt, matched) = match baseline {
                Baseline::EnumerateAll => {
                    let n1 = algo::compute_params(&inst.cdp, inst.class.len(), &params).n1(params.delta);
                    let mut meter = EpisodeMeter::new(params.budget);
                    match enumerate_all(&inst.cdp, &inst.class, n1, seed, &mut meter) {
                        Ok((id, _)) => {
                            let f = inst.class.by_id(id).expect("returned id is a member");
                            (meter.used(), Outcome::Success, scorer.suboptimality(&inst.cdp, f), None)
                        }
                        Err(Error::BudgetExceeded { .. }) => (meter.used(), Outcome::BudgetExceeded, None, None),
                        Err(e) => return Err(e.into()),
                    }
                }
                Baseline::EpsilonGreedy => {
                    let (report, _) = algo::lsvee(&inst.cdp, &inst.class, &params, seed);
                    let budget = report.episodes.total.max(1);
                    let mut meter = EpisodeMeter::new(Some(budget));
                    let policy = epsilon_greedy(&inst.cdp, 0.1, seed, &mut meter);
                    (meter.used(), Outcome::Success, scorer.policy_suboptimality(&inst.cdp, &policy), Some(budget))
                }
            };
            let row = ResultRow {
                seed,
                method: baseline.name().into(),
                episodes_total: episodes,
                episodes_consensus: 0,
                episodes_td_elim: 0,
                episodes_mc_policy_eval: if baseline == Baseline::EnumerateAll { episodes } else { 0 },
                td_elim_calls: 0,
                on_demand_iterations: 0,
                suboptimality: subopt,
                f_star_survived: None,
                outcome: outcome.as_str().into(),
                wall_clock_ms: start.elapsed().as_millis() as u64,
            };
            Ok(BaselineRun { row, matched_lsvee_episodes: matched })
        })
        .collect::<HarnessResult<_>>()?;
    if let Some(dir) = &config.output_dir {
        std::fs::create_dir_all(dir).map_err(super::io_err(dir))?;
        let rows: Vec<ResultRow> = runs.iter().map(|r| r.row.clone()).collect();
        write_results_csv(&dir.join(format!("baseline_{}.csv", baseline.name())), &rows)?;
    }
    Ok(runs)
}
