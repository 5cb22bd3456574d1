//! Exact values by backward induction: V*, Q*, the value of every member's
//! greedy policy and the best member.

use lsvee::{envgen, oracle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = envgen::make_random_realizable(3, 2, 3, 8, 2, 11)?;
    let cdp = &inst.cdp;
    let exact = oracle::compute_exact_values(cdp)?;

    println!("V* at the root: {:.6}", exact.root_value(cdp));
    for s in cdp.reachable_states() {
        println!("  V*({s}) = {:.6}", exact.v(s));
    }
    println!("largest Bellman violation: {:.2e}", oracle::q_consistency_violation(cdp, &exact));

    let k = cdp.num_actions();
    for f in &inst.class.members {
        let v = oracle::policy_value_exact(cdp, &f.policy(k))?;
        let tag = if inst.class.star_id() == Some(f.id) { "  <- Q*" } else { "" };
        println!("  V(pi_{:<2}) = {v:.6}{tag}", f.id);
    }
    let (best, value) = oracle::brute_force_policy_search(cdp, &inst.class)?;
    println!("best member {best} with value {value:.6}");
    Ok(())
}
