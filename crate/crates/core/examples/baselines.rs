//! Compares the learner with exhaustive policy evaluation and ε-greedy
//! tabular Q-learning on the same seeds.

use lsvee::algo::AlgoParams;
use lsvee::harness::{median, run_baseline, run_experiment, Baseline, EnvSpec, ExperimentConfig, ResultRow};

fn summary(name: &str, rows: &[ResultRow]) {
    let eps: Vec<u64> = rows.iter().map(|r| r.episodes_total).collect();
    let sub: Vec<f64> = rows.iter().filter_map(|r| r.suboptimality).collect();
    let worst = sub.iter().copied().fold(0.0, f64::max);
    println!("{name:<14} median episodes {:>10.0}  worst suboptimality {worst:.3}", median(&eps));
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig {
        env: EnvSpec::Disjoint { m: 3, k: 2, h: 3, n: 20, obs_per_state: 2, seed: None },
        algo: AlgoParams::default(),
        seeds: (0..4).collect(),
        budget: None,
        output_dir: None,
    };
    summary("lsvee", &run_experiment(&config)?);
    for b in [Baseline::EnumerateAll, Baseline::EpsilonGreedy] {
        let rows: Vec<ResultRow> = run_baseline(&config, b)?.into_iter().map(|r| r.row).collect();
        summary(b.name(), &rows);
    }
    Ok(())
}
