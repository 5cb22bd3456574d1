use serde::{Deserialize, Serialize};

use super::params::Schedule;
use crate::cdp::{Path, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    Success,
    BudgetExceeded,
    ClassEmptied,
    IterationGuardExceeded,
    /// Any other error, e.g. a TD elimination without cached child estimates.
    Failed,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::BudgetExceeded => "budgetExceeded",
            Outcome::ClassEmptied => "classEmptied",
            Outcome::IterationGuardExceeded => "iterationGuardExceeded",
            Outcome::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeCounts {
    pub total: u64,
    pub consensus: u64,
    pub td_elim: u64,
    pub mc_policy_eval: u64,
}

impl EpisodeCounts {
    pub fn subroutine_sum(&self) -> u64 {
        self.consensus + self.td_elim + self.mc_policy_eval
    }
}

/// One TD elimination step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EliminationRecord {
    pub path: Path,
    /// Hidden state the path resolves to; diagnostics only.
    pub state: StateId,
    /// Top-level depth-first invocation this call belongs to.
    pub invocation: usize,
    pub before: Vec<usize>,
    pub after: Vec<usize>,
    pub risks: Vec<f64>,
    pub threshold: f64,
    pub n_train: u64,
    /// Filled in by harnesses that know which member is Q*.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_star_survived: Option<bool>,
}

/// Structured log line; one per consensus test, TD elimination and
/// on-demand evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "camelCase")]
pub enum Event {
    #[serde(rename_all = "camelCase")]
    Consensus {
        path: Path,
        survivors: usize,
        n_test: u64,
        episodes: u64,
        total_episodes: u64,
        eps_test: f64,
        spread: f64,
        passed: bool,
    },
    #[serde(rename_all = "camelCase")]
    TdElim {
        path: Path,
        before: usize,
        after: usize,
        n_train: u64,
        episodes: u64,
        total_episodes: u64,
        threshold: f64,
        min_risk: f64,
    },
    #[serde(rename_all = "camelCase")]
    OnDemand {
        iteration: usize,
        function_id: usize,
        n1: u64,
        episodes: u64,
        total_episodes: u64,
        v_hat: f64,
        v_hat_star: f64,
        passed: bool,
    },
}

/// Everything a run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub seed: u64,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub returned_function_id: Option<usize>,
    pub v_hat_star: Option<f64>,
    pub episodes: EpisodeCounts,
    pub consensus_calls: usize,
    pub td_elim_calls: usize,
    /// Depth-first calls including recursion.
    pub dfs_calls: usize,
    /// Top-level depth-first invocations (one at the root plus one per
    /// on-demand prefix).
    pub dfs_invocations: usize,
    pub td_elim_per_invocation: Vec<usize>,
    /// TD eliminations that hit a state already trained in the same invocation.
    pub repeated_td_elim_states: usize,
    pub on_demand_iterations: usize,
    pub survivors: Vec<usize>,
    pub survivor_trace: Vec<EliminationRecord>,
    pub schedule: Schedule,
}

impl RunReport {
    pub fn max_td_elim_per_invocation(&self) -> usize {
        self.td_elim_per_invocation.iter().copied().max().unwrap_or(0)
    }

    /// Marks, for every elimination Q* took part in, whether it survived.
    pub fn annotate_star(&mut self, star_id: usize) {
        for rec in &mut self.survivor_trace {
            rec.f_star_survived = rec.before.contains(&star_id).then(|| rec.after.contains(&star_id));
        }
    }

    /// True when Q* was never eliminated.
    pub fn star_survived(&self, star_id: usize) -> bool {
        self.survivors.contains(&star_id)
            && self
                .survivor_trace
                .iter()
                .all(|r| !r.before.contains(&star_id) || r.after.contains(&star_id))
    }
}
