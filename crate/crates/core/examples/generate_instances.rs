//! Generates one instance of each family, checks the modelling assumptions
//! and writes the random one to disk.
//!
//! ```text
//! cargo run --example generate_instances -- /tmp/lsvee-instance
//! ```

use std::path::PathBuf;

use lsvee::envgen;
use lsvee::harness;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);

    let random = envgen::make_random_realizable(3, 2, 3, 20, 2, 7)?;
    let disjoint = envgen::make_disjoint_obs(3, 2, 3, 3, 20, 7)?;
    let lock = envgen::make_lock(4, 2, 0.1, None, 7)?;

    for (name, cdp, class) in [
        ("random", &random.cdp, &random.class),
        ("disjoint", &disjoint.cdp, &disjoint.class),
        ("lock", &lock.cdp, &lock.class),
    ] {
        let report = envgen::validate_assumptions(cdp, class)?;
        println!(
            "{name:<9} levels {:?}  |F| = {:<3} reactive Q*: {:<5} realizable: {:<5} deterministic: {}",
            cdp.level_sizes(),
            class.len(),
            report.reactive_q_star.holds,
            report.realizable.holds,
            report.deterministic.holds,
        );
        if let Some(why) = &report.reactive_q_star.counterexample {
            println!("          {why}");
        }
    }
    println!("lock optimal path {:?}", lock.p_star);

    let cdp_path = dir.join("random_cdp.json");
    let class_path = dir.join("random_class.json");
    harness::save_instance(&random, &cdp_path, &class_path)?;
    let back = harness::load_instance(&cdp_path, &class_path)?;
    assert_eq!(back, random);
    println!("wrote {} and {}", cdp_path.display(), class_path.display());
    Ok(())
}
