//! PAC learning in layered, deterministic-transition contextual decision
//! processes with a finite realizable Q-function class.
//!
//! * [`cdp`]: the environment model and episode simulator.
//! * [`funcclass`]: finite Q-function classes, greedy policies and
//!   Monte-Carlo value predictions.
//! * [`oracle`]: exact dynamic programming used as ground truth.
//! * [`algo`]: the learner (consensus tests, TD elimination, depth-first
//!   learning and on-demand exploration).
//! * [`envgen`]: instance generators (random realizable, disjoint
//!   observations, combination lock) and assumption checks.
//! * [`harness`]: experiment configs, sweeps, baselines and result files.

pub mod algo;
pub mod cdp;
pub mod envgen;
pub mod error;
pub mod funcclass;
pub mod harness;
pub mod oracle;
pub mod rng;

pub use cdp::{EpisodeMeter, LayeredCdp, Observation, Path, Policy, StateId, Trajectory};
pub use error::{Error, Result};
pub use funcclass::{FunctionClass, QFunction, ValueCache};
