//! The combination lock: only one open-loop path pays 1/2 + ε, so any method
//! that evaluates policies one by one needs about K^H evaluations.

use lsvee::cdp::EpisodeMeter;
use lsvee::harness::enumerate_all;
use lsvee::{envgen, oracle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lock = envgen::make_lock(4, 2, 0.1, Some(vec![1, 0, 1, 1]), 0)?;
    let exact = oracle::compute_exact_values(&lock.cdp)?;
    println!("V* = {:.3}", exact.root_value(&lock.cdp));

    let mut values: Vec<f64> = Vec::new();
    for p in &lock.policies {
        values.push(oracle::policy_value_exact(&lock.cdp, p)?);
    }
    let at_half = values.iter().filter(|v| (**v - 0.5).abs() < 1e-12).count();
    println!("{} policies, {} of them worth exactly 0.5", values.len(), at_half);

    println!("\n H  policies  episodes (enumerate, 200 each)");
    for h in [2, 4, 6, 8] {
        let lock = envgen::make_lock(h, 2, 0.1, None, h as u64)?;
        let mut meter = EpisodeMeter::unlimited();
        let (id, _) = enumerate_all(&lock.cdp, &lock.class, 200, 0, &mut meter)?;
        let hit = lock.class.by_id(id).map(|f| lock.class.star_id() == Some(f.id)).unwrap_or(false);
        println!("{h:>2}  {:>8}  {:>9}  found p*: {hit}", lock.class.len(), meter.used());
    }
    Ok(())
}
