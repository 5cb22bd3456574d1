//! Drives the learner's subroutines one at a time: a consensus test at a
//! child, TD elimination at the root, then consensus again at the root.

use lsvee::algo::{compute_params, AlgoParams, Learner};
use lsvee::{envgen, Path};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = envgen::make_random_realizable(2, 2, 2, 10, 2, 5)?;
    let sched = compute_params(&inst.cdp, inst.class.len(), &AlgoParams::default());
    let mut learner = Learner::new(&inst.cdp, sched, None, 1);
    let fs = inst.class.members.clone();

    let eps = sched.eps_test(0);
    for a in 0..inst.cdp.num_actions() {
        let child = Path::root().child(a);
        let agree = learner.consensus(&child, &fs, eps, 0.01)?;
        println!("consensus at {child}: {agree} (tolerance {eps:.4})");
    }
    let survivors = learner.td_elim(&Path::root(), fs, 0.01)?;
    println!("td-elim at the root kept {:?}", survivors.iter().map(|f| f.id).collect::<Vec<_>>());

    let again = learner.consensus(&Path::root(), &survivors, sched.eps_test(0), 0.01)?;
    println!("consensus at the root afterwards: {again}");
    println!("episodes used: {}", learner.episodes_used());
    Ok(())
}
