use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessResult};

/// Column order of every results CSV.
pub const CSV_COLUMNS: [&str; 12] = [
    "seed",
    "method",
    "episodesTotal",
    "episodesConsensus",
    "episodesTdElim",
    "episodesMcPolicyEval",
    "tdElimCalls",
    "onDemandIterations",
    "suboptimality",
    "fStarSurvived",
    "outcome",
    "wallClockMs",
];

/// One line of a results table. `suboptimality` is empty when no policy was
/// returned or the environment is too large for the oracle; `fStarSurvived`
/// is empty when the class does not mark Q* or the method does not eliminate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultRow {
    pub seed: u64,
    pub method: String,
    pub episodes_total: u64,
    pub episodes_consensus: u64,
    pub episodes_td_elim: u64,
    pub episodes_mc_policy_eval: u64,
    pub td_elim_calls: u64,
    pub on_demand_iterations: u64,
    pub suboptimality: Option<f64>,
    pub f_star_survived: Option<bool>,
    pub outcome: String,
    pub wall_clock_ms: u64,
}

impl ResultRow {
    pub fn without_timing(&self) -> Self {
        Self { wall_clock_ms: 0, ..self.clone() }
    }
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> HarnessResult<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> HarnessResult<Vec<ResultRow>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}
