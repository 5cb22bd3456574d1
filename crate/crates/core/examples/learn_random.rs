//! Runs the learner on a random realizable instance and compares the
//! returned policy with the exact optimum.

use lsvee::algo::{lsvee, AlgoParams};
use lsvee::{envgen, oracle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let inst = envgen::make_random_realizable(3, 2, 3, 20, 2, seed)?;
    let params = AlgoParams { epsilon: 0.4, delta: 0.1, ..Default::default() };

    let (report, events) = lsvee(&inst.cdp, &inst.class, &params, seed);
    let sched = &report.schedule;
    println!("phi = {:.4}, n_test = {}, n_train = {}", sched.phi, sched.n_test(sched.consensus_delta(0.05)), sched.n_train(sched.td_elim_delta(0.05)));
    println!("outcome {:?} after {} episodes", report.outcome, report.episodes.total);
    println!(
        "  consensus {}  td-elim {}  policy evaluation {}",
        report.episodes.consensus, report.episodes.td_elim, report.episodes.mc_policy_eval
    );
    for rec in &report.survivor_trace {
        println!("  eliminate at {} ({}): {} -> {} members", rec.path, rec.state, rec.before.len(), rec.after.len());
    }
    println!("{} logged events", events.len());

    let exact = oracle::compute_exact_values(&inst.cdp)?;
    let v_star = exact.root_value(&inst.cdp);
    if let (Some(id), Some(v_hat)) = (report.returned_function_id, report.v_hat_star) {
        let f = inst.class.by_id(id).expect("member");
        let v = oracle::policy_value_exact(&inst.cdp, &f.policy(inst.cdp.num_actions()))?;
        println!("returned f{id}: V = {v:.4}, V* = {v_star:.4}, estimate of V* = {v_hat:.4}");
        println!("Q* survived: {}", report.star_survived(inst.class.star_id().expect("generator marks Q*")));
    }
    Ok(())
}
