//! Experiment configuration, seed sweeps, baselines and result files.
//!
//! A run is a pure function of `(config, seed)`: the environment seed is
//! either fixed in the config or taken from the run seed, and every random
//! draw inside the learner comes from streams keyed by the run seed.

mod baseline;
mod results;

use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algo::{self, AlgoParams, Event, Outcome, RunReport};
use crate::cdp::LayeredCdp;
use crate::envgen::{self, Instance};
use crate::funcclass::{FunctionClass, QFunction};
use crate::oracle;

pub use baseline::{enumerate_all, epsilon_greedy, run_baseline, Baseline, BaselineRun};
pub use results::{read_results_csv, write_results_csv, ResultRow, CSV_COLUMNS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: &FsPath) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Where an experiment's environment comes from. A missing `seed` means
/// "use the run seed", giving a fresh instance per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "camelCase")]
pub enum EnvSpec {
    #[serde(rename_all = "camelCase")]
    Random {
        m: usize,
        k: usize,
        h: usize,
        n: usize,
        #[serde(default = "default_obs")]
        obs_per_state: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    #[serde(rename_all = "camelCase")]
    Disjoint {
        m: usize,
        k: usize,
        h: usize,
        n: usize,
        #[serde(default = "default_obs")]
        obs_per_state: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    #[serde(rename_all = "camelCase")]
    Lock {
        h: usize,
        k: usize,
        epsilon: f64,
        #[serde(default)]
        p_star: Option<Vec<usize>>,
        #[serde(default)]
        seed: Option<u64>,
    },
    #[serde(rename_all = "camelCase")]
    File { cdp: PathBuf, class: PathBuf },
}

fn default_obs() -> usize {
    2
}

/// Environment seeds are kept apart from learner seeds.
const ENV_SEED_SALT: u64 = 0x5eed_0000_e417;

impl EnvSpec {
    pub fn build(&self, run_seed: u64) -> HarnessResult<Instance> {
        let pick = |s: &Option<u64>| s.unwrap_or(run_seed ^ ENV_SEED_SALT);
        Ok(match self {
            EnvSpec::Random { m, k, h, n, obs_per_state, seed } => {
                envgen::make_random_realizable(*m, *k, *h, *n, *obs_per_state, pick(seed))?
            }
            EnvSpec::Disjoint { m, k, h, n, obs_per_state, seed } => {
                envgen::make_disjoint_obs(*m, *k, *h, *obs_per_state, *n, pick(seed))?
            }
            EnvSpec::Lock { h, k, epsilon, p_star, seed } => {
                let lock = envgen::make_lock(*h, *k, *epsilon, p_star.clone(), pick(seed))?;
                Instance { cdp: lock.cdp, class: lock.class }
            }
            EnvSpec::File { cdp, class } => load_instance(cdp, class)?,
        })
    }
}

pub fn load_instance(cdp: &FsPath, class: &FsPath) -> HarnessResult<Instance> {
    let cdp_text = fs::read_to_string(cdp).map_err(io_err(cdp))?;
    let class_text = fs::read_to_string(class).map_err(io_err(class))?;
    let cdp = LayeredCdp::from_json(&cdp_text)?;
    let class = FunctionClass::from_json(&class_text)?;
    Ok(Instance { cdp, class })
}

pub fn save_instance(inst: &Instance, cdp: &FsPath, class: &FsPath) -> HarnessResult<()> {
    write_text(cdp, &inst.cdp.to_json())?;
    write_text(class, &inst.class.to_json())
}

fn write_text(path: &FsPath, text: &str) -> HarnessResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub algo: AlgoParams,
    pub seeds: Vec<u64>,
    /// Overrides `algo.budget` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> HarnessResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> HarnessResult<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let a = &self.algo;
        if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
            return Err(HarnessError::Config(format!("epsilon {} outside (0,1)", a.epsilon)));
        }
        if !(a.delta > 0.0 && a.delta < 1.0) {
            return Err(HarnessError::Config(format!("delta {} outside (0,1)", a.delta)));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("no seeds".into()));
        }
        if self.effective_params().budget == Some(0) {
            return Err(HarnessError::Config("budget must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_params(&self) -> AlgoParams {
        let mut p = self.algo.clone();
        if self.budget.is_some() {
            p.budget = self.budget;
        }
        p
    }
}

/// Oracle quantities needed to score a returned policy.
#[derive(Debug, Clone)]
pub struct Scorer {
    v_star: Option<f64>,
    num_actions: usize,
}

impl Scorer {
    pub fn new(cdp: &LayeredCdp) -> Self {
        let v_star = oracle::compute_exact_values(cdp).ok().map(|e| e.root_value(cdp));
        Self { v_star, num_actions: cdp.num_actions() }
    }

    pub fn v_star(&self) -> Option<f64> {
        self.v_star
    }

    /// `V* − V(π_f)`, or `None` when the environment is too large for the oracle.
    pub fn suboptimality(&self, cdp: &LayeredCdp, f: &QFunction) -> Option<f64> {
        let v = oracle::policy_value_exact(cdp, &f.policy(self.num_actions)).ok()?;
        Some(self.v_star? - v)
    }

    pub fn policy_suboptimality(&self, cdp: &LayeredCdp, policy: &dyn crate::Policy) -> Option<f64> {
        let v = oracle::policy_value_exact(cdp, policy).ok()?;
        Some(self.v_star? - v)
    }
}

/// Everything produced by one seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub row: ResultRow,
    pub report: RunReport,
    pub events: Vec<Event>,
    pub v_star: Option<f64>,
}

/// Builds the environment for `seed`, runs the learner and scores the result.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> HarnessResult<SeedRun> {
    let inst = config.env.build(seed)?;
    let params = config.effective_params();
    let start = Instant::now();
    let (report, events) = algo::lsvee(&inst.cdp, &inst.class, &params, seed);
    let wall_clock_ms = start.elapsed().as_millis() as u64;
    let scorer = Scorer::new(&inst.cdp);
    let suboptimality = report
        .returned_function_id
        .and_then(|id| inst.class.by_id(id))
        .and_then(|f| scorer.suboptimality(&inst.cdp, f));
    let row = ResultRow {
        seed,
        method: "lsvee".into(),
        episodes_total: report.episodes.total,
        episodes_consensus: report.episodes.consensus,
        episodes_td_elim: report.episodes.td_elim,
        episodes_mc_policy_eval: report.episodes.mc_policy_eval,
        td_elim_calls: report.td_elim_calls as u64,
        on_demand_iterations: report.on_demand_iterations as u64,
        suboptimality,
        f_star_survived: inst.class.star_id().map(|s| report.star_survived(s)),
        outcome: report.outcome.as_str().into(),
        wall_clock_ms,
    };
    Ok(SeedRun { row, report, events, v_star: scorer.v_star() })
}

/// Runs every seed in parallel, writes results when an output directory is
/// set, and returns rows in seed order. Failures inside a run end up in its
/// `outcome`; only environment construction and I/O abort the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> HarnessResult<Vec<ResultRow>> {
    Ok(run_experiment_detailed(config)?.into_iter().map(|r| r.row).collect())
}

pub fn run_experiment_detailed(config: &ExperimentConfig) -> HarnessResult<Vec<SeedRun>> {
    config.validate()?;
    let runs: Vec<SeedRun> = config.seeds.par_iter().map(|&s| run_seed(config, s)).collect::<HarnessResult<_>>()?;
    if let Some(dir) = &config.output_dir {
        write_runs(dir, "results.csv", &runs)?;
    }
    Ok(runs)
}

/// Writes `csv_name`, plus `run_<seed>.json` and `events_<seed>.jsonl` per seed.
pub fn write_runs(dir: &FsPath, csv_name: &str, runs: &[SeedRun]) -> HarnessResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let rows: Vec<ResultRow> = runs.iter().map(|r| r.row.clone()).collect();
    write_results_csv(&dir.join(csv_name), &rows)?;
    for run in runs {
        let seed = run.row.seed;
        let report_path = dir.join(format!("run_{seed}.json"));
        write_text(&report_path, &serde_json::to_string_pretty(&run.report)?)?;
        let events_path = dir.join(format!("events_{seed}.jsonl"));
        let file = fs::File::create(&events_path).map_err(io_err(&events_path))?;
        let mut out = std::io::BufWriter::new(file);
        for ev in &run.events {
            serde_json::to_writer(&mut out, ev)?;
            out.write_all(b"\n").map_err(io_err(&events_path))?;
        }
        out.flush().map_err(io_err(&events_path))?;
    }
    Ok(())
}

/// True when there was at least one run and every run ran out of budget.
pub fn all_budget_exceeded(rows: &[ResultRow]) -> bool {
    !rows.is_empty() && rows.iter().all(|r| r.outcome == Outcome::BudgetExceeded.as_str())
}

pub fn median(values: &[u64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    }
}
