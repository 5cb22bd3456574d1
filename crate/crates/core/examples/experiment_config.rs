//! Experiment configs are plain JSON. This writes one, reads it back and runs
//! it, producing results.csv plus a report and an event log per seed.

use lsvee::harness::{read_results_csv, run_experiment, ExperimentConfig};

const CONFIG: &str = r#"{
  "env": { "generator": "lock", "h": 3, "k": 2, "epsilon": 0.2, "pStar": [0, 1, 1] },
  "algo": { "epsilon": 0.2, "delta": 0.1, "mode": "practical" },
  "seeds": [0, 1, 2],
  "budget": 50000000
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("lsvee-config-example");
    let mut config = ExperimentConfig::from_json(CONFIG)?;
    config.output_dir = Some(dir.clone());
    println!("{}", config.to_json());

    let rows = run_experiment(&config)?;
    for row in &rows {
        println!(
            "seed {}: {} in {} episodes, suboptimality {:?}",
            row.seed, row.outcome, row.episodes_total, row.suboptimality
        );
    }
    assert_eq!(read_results_csv(&dir.join("results.csv"))?, rows);
    println!("files in {}", dir.display());
    Ok(())
}
