use thiserror::Error;

use crate::cdp::Path;

/// Errors raised by the environment, the oracle and the learner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("action {action} out of range (environment has {num_actions} actions)")]
    InvalidAction { action: usize, num_actions: usize },

    #[error("path {path} has length {len}, at most {max} allowed here")]
    PathTooLong { path: Path, len: usize, max: usize },

    #[error("episode budget of {budget} exhausted")]
    BudgetExceeded { budget: u64 },

    #[error("oracle size guard exceeded: {work} elementary operations > {limit}")]
    SizeGuardExceeded { work: u64, limit: u64 },

    #[error("invalid environment: {0}")]
    InvalidCdp(String),

    #[error("invalid function class: {0}")]
    InvalidClass(String),

    #[error("generated instance failed validation: {0}")]
    ValidationFailed(String),

    #[error("every function was eliminated at path {path}")]
    ClassEmptied { path: Path },

    #[error("explore-on-demand exceeded {limit} iterations")]
    IterationGuardExceeded { limit: usize },

    #[error("missing value estimate for function {function} at path {path}")]
    MissingEstimate { path: Path, function: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
