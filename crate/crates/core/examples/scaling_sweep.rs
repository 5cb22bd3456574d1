//! Episode counts as the number of states per level grows. Writes one CSV
//! per M into the given directory.
//!
//! ```text
//! cargo run --release --example scaling_sweep -- /tmp/lsvee-sweep
//! ```

use std::path::PathBuf;

use lsvee::algo::AlgoParams;
use lsvee::harness::{median, run_experiment, EnvSpec, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lsvee-sweep"));
    println!(" M  median episodes");
    for m in [2, 4, 8] {
        let config = ExperimentConfig {
            env: EnvSpec::Random { m, k: 2, h: 3, n: 20, obs_per_state: 2, seed: None },
            algo: AlgoParams { max_states_per_level: Some(m), ..Default::default() },
            seeds: (0..10).collect(),
            budget: None,
            output_dir: Some(root.join(format!("m{m}"))),
        };
        let rows = run_experiment(&config)?;
        let eps: Vec<u64> = rows.iter().map(|r| r.episodes_total).collect();
        println!("{m:>2}  {:>15.0}", median(&eps));
    }
    println!("results under {}", root.display());
    Ok(())
}
