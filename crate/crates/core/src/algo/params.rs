//! Accuracy parameter, sample sizes and failure-probability allocation.
//!
//! | quantity     | theory                         | practical default            |
//! |--------------|--------------------------------|------------------------------|
//! | φ            | ε / (320 H² √K)                | ε / (4 H √K)                 |
//! | ε_test(\|p\|)| 20 (H − \|p\| − 5/4) √K φ      | 2 (H − \|p\| − 5/4) √K φ     |
//! | n_train      | 24 log(4N/δ′) / φ²             | 8 log(4N/δ′) / φ²            |
//! | n_test       | 2 log(2N/δ′) / φ²              | 2 log(2N/δ′) / φ²            |
//! | threshold    | 2φ² + 22 log(2N/δ′) / n_train  | same                         |
//! | ε_demand     | ε / 2                          | same                         |
//! | n₁           | 32 log(6MH/δ) / ε²             | 8 log(6MH/δ) / ε²            |
//! | n₂           | 8 log(3MH/δ) / ε               | 4 log(3MH/δ) / ε             |
//!
//! Failure probability is split per call: consensus gets `δ/2/(MKH)`, TD
//! elimination `δ/2/(MH)`, and each depth-first call issued by on-demand
//! exploration `δ/(3MH²n₂)`. The main-text variant of the same algorithm
//! uses slightly different logarithms (`log(12MH/δ)` for n₁,
//! `22 log(4MHN/δ)` in the threshold with an undivided δ); this
//! implementation follows the per-call allocation throughout.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum ConstantsMode {
    Theory,
    #[default]
    Practical,
}

/// Leading constants of every schedule formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Constants {
    /// φ = ε / (phi_divisor · H^phi_horizon_power · √K)
    pub phi_divisor: f64,
    pub phi_horizon_power: i32,
    /// ε_test = test_scale · (H − |p| − 5/4) · √K · φ
    pub test_scale: f64,
    pub n_train_scale: f64,
    pub n_test_scale: f64,
    pub n1_scale: f64,
    pub n2_scale: f64,
}

impl Constants {
    pub const THEORY: Constants = Constants {
        phi_divisor: 320.0,
        phi_horizon_power: 2,
        test_scale: 20.0,
        n_train_scale: 24.0,
        n_test_scale: 2.0,
        n1_scale: 32.0,
        n2_scale: 8.0,
    };

    pub const PRACTICAL: Constants = Constants {
        phi_divisor: 4.0,
        phi_horizon_power: 1,
        test_scale: 2.0,
        n_train_scale: 8.0,
        n_test_scale: 2.0,
        n1_scale: 8.0,
        n2_scale: 4.0,
    };

    pub fn for_mode(mode: ConstantsMode) -> Self {
        match mode {
            ConstantsMode::Theory => Self::THEORY,
            ConstantsMode::Practical => Self::PRACTICAL,
        }
    }
}

/// User-facing algorithm configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct AlgoParams {
    pub epsilon: f64,
    pub delta: f64,
    pub mode: ConstantsMode,
    /// Replaces the mode's constants when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    /// Episode cap for one run.
    pub budget: Option<u64>,
    /// Bound `M` on states per level; defaults to the environment's widest level.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_states_per_level: Option<usize>,
}

pub const DEFAULT_BUDGET: u64 = 100_000_000;

impl Default for AlgoParams {
    fn default() -> Self {
        Self {
            epsilon: 0.4,
            delta: 0.1,
            mode: ConstantsMode::Practical,
            constants: None,
            budget: Some(DEFAULT_BUDGET),
            max_states_per_level: None,
        }
    }
}

impl AlgoParams {
    pub fn constants(&self) -> Constants {
        self.constants.unwrap_or_else(|| Constants::for_mode(self.mode))
    }
}

/// Fully resolved schedule for one `(ε, δ, H, K, M, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Schedule {
    pub epsilon: f64,
    pub delta: f64,
    pub horizon: usize,
    pub num_actions: usize,
    pub max_states: usize,
    pub class_size: usize,
    pub constants: Constants,
    pub phi: f64,
}

fn ceil_count(x: f64) -> u64 {
    x.ceil().max(1.0) as u64
}

/// `ceil(scale · log(4N/δ) / φ²)`
pub fn n_train(scale: f64, class_size: usize, delta: f64, phi: f64) -> u64 {
    ceil_count(scale * (4.0 * class_size as f64 / delta).ln() / (phi * phi))
}

/// `ceil(scale · log(2N/δ) / φ²)`
pub fn n_test(scale: f64, class_size: usize, delta: f64, phi: f64) -> u64 {
    ceil_count(scale * (2.0 * class_size as f64 / delta).ln() / (phi * phi))
}

impl Schedule {
    pub fn new(
        epsilon: f64,
        delta: f64,
        horizon: usize,
        num_actions: usize,
        max_states: usize,
        class_size: usize,
        constants: Constants,
    ) -> Self {
        assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0,1)");
        assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
        assert!(horizon >= 1 && num_actions >= 1 && max_states >= 1 && class_size >= 1);
        let phi = epsilon
            / (constants.phi_divisor * (horizon as f64).powi(constants.phi_horizon_power) * (num_actions as f64).sqrt());
        Self { epsilon, delta, horizon, num_actions, max_states, class_size, constants, phi }
    }

    pub fn for_mode(
        epsilon: f64,
        delta: f64,
        horizon: usize,
        num_actions: usize,
        max_states: usize,
        class_size: usize,
        mode: ConstantsMode,
    ) -> Self {
        Self::new(epsilon, delta, horizon, num_actions, max_states, class_size, Constants::for_mode(mode))
    }

    fn mkh(&self) -> (f64, f64, f64) {
        (self.max_states as f64, self.num_actions as f64, self.horizon as f64)
    }

    /// Consensus tolerance for the children of a node at depth `parent_len`.
    pub fn eps_test(&self, parent_len: usize) -> f64 {
        let (_, k, h) = self.mkh();
        self.constants.test_scale * (h - parent_len as f64 - 1.25) * k.sqrt() * self.phi
    }

    pub fn n_train(&self, delta: f64) -> u64 {
        n_train(self.constants.n_train_scale, self.class_size, delta, self.phi)
    }

    pub fn n_test(&self, delta: f64) -> u64 {
        n_test(self.constants.n_test_scale, self.class_size, delta, self.phi)
    }

    /// Slack above the minimum empirical TD risk: `2φ² + 22 log(2N/δ)/n_train`.
    pub fn threshold(&self, delta: f64, n_train: u64) -> f64 {
        2.0 * self.phi * self.phi + 22.0 * (2.0 * self.class_size as f64 / delta).ln() / n_train as f64
    }

    pub fn eps_demand(&self) -> f64 {
        self.epsilon / 2.0
    }

    /// Trajectories per policy evaluation; `delta` is the on-demand phase's share.
    pub fn n1(&self, delta: f64) -> u64 {
        let (m, _, h) = self.mkh();
        ceil_count(self.constants.n1_scale * (6.0 * m * h / delta).ln() / (self.epsilon * self.epsilon))
    }

    /// Trajectories whose prefixes are trained on after a failed evaluation.
    pub fn n2(&self, delta: f64) -> u64 {
        let (m, _, h) = self.mkh();
        ceil_count(self.constants.n2_scale * (3.0 * m * h / delta).ln() / self.epsilon)
    }

    pub fn consensus_delta(&self, delta: f64) -> f64 {
        let (m, k, h) = self.mkh();
        delta / 2.0 / (m * k * h)
    }

    pub fn td_elim_delta(&self, delta: f64) -> f64 {
        let (m, _, h) = self.mkh();
        delta / 2.0 / (m * h)
    }

    pub fn on_demand_dfs_delta(&self, delta: f64, n2: u64) -> f64 {
        let (m, _, h) = self.mkh();
        delta / (3.0 * m * h * h * n2 as f64)
    }

    /// Cap on on-demand iterations before giving up.
    pub fn iteration_guard(&self) -> usize {
        2 * self.max_states * self.horizon
    }
}
