//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances and trial counts are pinned
//! below.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lsvee::algo::{self, compute_params, AlgoParams, Learner, Outcome};
use lsvee::funcclass::{mc_value_prediction, QFunction};
use lsvee::harness::{self, median, EnvSpec, ExperimentConfig, SeedRun};
use lsvee::rng::derive;
use lsvee::{envgen, oracle, EpisodeMeter, Path, ValueCache};

const EXACT_TOL: f64 = 1e-9;

const PAC_SEEDS: u64 = 20;
const PAC_REQUIRED: usize = 18;
const PAC_EPSILON: f64 = 0.4;
const PAC_DELTA: f64 = 0.1;

const CONC_TRIALS: usize = 500;
const CONC_REQUIRED: usize = 375;
const CONC_N: u64 = 1060;

const IDEM_TRIALS: u64 = 200;
const IDEM_REQUIRED: usize = 180;

const SNAPSHOTS: u64 = 20;
const SCALING_SEEDS: u64 = 10;
const SCALING_MAX_RATIO: f64 = 12.0;

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

fn timed(id: u32, name: &'static str, limit_s: u64, body: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = body();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_s);
    Verdict { id, name, pass: pass && elapsed <= limit, detail, elapsed, limit }
}

fn report(v: &Verdict) {
    println!(
        "{} [{}] {}: {} ({:.1} s, limit {} s)",
        if v.pass { "PASS" } else { "FAIL" },
        v.id,
        v.name,
        v.detail,
        v.elapsed.as_secs_f64(),
        v.limit.as_secs()
    );
}

fn oracle_correctness() -> (bool, String) {
    let mut worst_value = 0.0f64;
    let mut worst_bellman = 0.0f64;
    for s in 0..50u64 {
        let (m, k, h) = (1 + (s % 4) as usize, 1 + ((s / 4) % 3) as usize, 1 + ((s / 12) % 3) as usize);
        let inst = envgen::make_random_realizable(m, k, h, 4, 2, 9000 + s).expect("instance");
        let exact = oracle::compute_exact_values(&inst.cdp).expect("oracle");
        let q_star = exact.q_star_function(&inst.cdp, 0).expect("reactive Q*");
        let v = oracle::policy_value_exact(&inst.cdp, &q_star.policy(k)).expect("policy value");
        worst_value = worst_value.max((v - exact.root_value(&inst.cdp)).abs());
        worst_bellman = worst_bellman.max(oracle::q_consistency_violation(&inst.cdp, &exact));
    }
    let ok = worst_value <= EXACT_TOL && worst_bellman <= EXACT_TOL;
    (ok, format!("50 instances, max |V(pi*) - V*| = {worst_value:.1e}, max Bellman residual = {worst_bellman:.1e}"))
}

fn lock_construction() -> (bool, String) {
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, h, eps) in [(2usize, 4usize, 0.1f64), (3, 3, 0.1)] {
        let lock = envgen::make_lock(h, k, eps, None, 1).expect("lock");
        let exact = oracle::compute_exact_values(&lock.cdp).expect("oracle");
        let v_star_ok = (exact.root_value(&lock.cdp) - (0.5 + eps)).abs() <= 1e-12;
        let mut others = 0;
        let mut others_ok = true;
        for (i, p) in lock.policies.iter().enumerate() {
            let v = oracle::policy_value_exact(&lock.cdp, p).expect("value");
            if envgen::index_to_path(i as u64, k, h) == lock.p_star {
                others_ok &= (v - (0.5 + eps)).abs() <= 1e-12;
            } else {
                others += 1;
                others_ok &= (v - 0.5).abs() <= 1e-12;
            }
        }
        ok &= v_star_ok && others_ok;
        parts.push(format!("(K={k},H={h}): V*=0.5+eps {v_star_ok}, {others} others at 0.5 {others_ok}"));
    }
    (ok, parts.join("; "))
}

fn pac_config() -> ExperimentConfig {
    ExperimentConfig {
        env: EnvSpec::Random { m: 3, k: 2, h: 3, n: 20, obs_per_state: 2, seed: None },
        algo: AlgoParams { epsilon: PAC_EPSILON, delta: PAC_DELTA, ..Default::default() },
        seeds: (0..PAC_SEEDS).collect(),
        budget: None,
        output_dir: None,
    }
}

fn pac_end_to_end(runs: &[SeedRun]) -> (bool, String) {
    let good = runs.iter().filter(|r| r.row.suboptimality.is_some_and(|s| s <= PAC_EPSILON)).count();
    let kept = runs.iter().filter(|r| r.row.f_star_survived == Some(true)).count();
    let worst = runs.iter().filter_map(|r| r.row.suboptimality).fold(0.0, f64::max);
    let ok = good >= PAC_REQUIRED && kept >= PAC_REQUIRED;
    (ok, format!("eps-optimal {good}/{PAC_SEEDS}, Q* retained {kept}/{PAC_SEEDS}, worst suboptimality {worst:.4}"))
}

fn structural_bounds(runs: &[SeedRun]) -> (bool, String) {
    let (m, h) = (3usize, 3usize);
    let max_td = runs.iter().map(|r| r.report.max_td_elim_per_invocation()).max().unwrap_or(0);
    let max_od = runs.iter().map(|r| r.report.on_demand_iterations).max().unwrap_or(0);
    let failed = runs.iter().filter(|r| r.report.outcome == Outcome::Failed).count();
    let ok = max_td <= m * h && max_od <= 2 * m * h && failed == 0;
    (
        ok,
        format!(
            "max td-elim per invocation {max_td} <= {}, max on-demand iterations {max_od} <= {}, runs with missing child estimates {failed}",
            m * h,
            2 * m * h
        ),
    )
}

fn concentration() -> (bool, String) {
    let (n_funcs, delta, phi) = (20usize, 0.2, 0.1);
    let n = algo::params::n_test(2.0, n_funcs, delta, phi);
    let inst = envgen::make_random_realizable(3, 2, 3, n_funcs, 3, 4242).expect("instance");
    let path = Path(vec![1]);
    let truth: Vec<f64> =
        inst.class.members.iter().map(|f| oracle::value_prediction_exact(&inst.cdp, &path, f).expect("exact")).collect();
    let mut within = 0;
    for t in 0..CONC_TRIALS {
        let mut rng = derive(t as u64, &[5]);
        let mut meter = EpisodeMeter::unlimited();
        let mut cache = ValueCache::new();
        let est = mc_value_prediction(&inst.cdp, &path, &inst.class.members, n, &mut rng, &mut meter, &mut cache)
            .expect("estimate");
        let dev = inst.class.members.iter().zip(&truth).map(|(f, v)| (est[&f.id] - v).abs()).fold(0.0, f64::max);
        if dev <= phi {
            within += 1;
        }
    }
    (n == CONC_N && within >= CONC_REQUIRED, format!("n = {n}, max deviation <= phi in {within}/{CONC_TRIALS} trials"))
}

fn consensus_idempotence() -> (bool, String) {
    let params = AlgoParams::default();
    let mut passed = 0;
    for t in 0..IDEM_TRIALS {
        let inst = envgen::make_random_realizable(2, 2, 2, 10, 2, 7000 + t).expect("instance");
        let sched = compute_params(&inst.cdp, inst.class.len(), &params);
        let mut learner = Learner::new(&inst.cdp, sched, None, t);
        let p = Path(vec![(t % 2) as usize]);
        let delta = sched.delta / 2.0;
        let fs = learner.dfs_learn(&p, inst.class.members.clone(), delta).expect("learn");
        if learner.consensus(&p, &fs, sched.eps_test(p.len() - 1), sched.consensus_delta(delta)).expect("consensus") {
            passed += 1;
        }
    }
    (passed >= IDEM_REQUIRED, format!("consensus true after td-elim in {passed}/{IDEM_TRIALS} trials"))
}

fn learned_set_inequality() -> (bool, String) {
    let params = AlgoParams::default();
    let mut checked = 0;
    let mut worst_margin = f64::INFINITY;
    let mut violations = 0;
    let mut interrupted = 0;
    for i in 0..SNAPSHOTS {
        let inst = envgen::make_random_realizable(3, 2, 3, 20, 2, 5000 + i).expect("instance");
        let budget = 150_000 + 20_000 * i;
        let p = AlgoParams { budget: Some(budget), ..params.clone() };
        let (rep, _) = algo::lsvee(&inst.cdp, &inst.class, &p, i);
        if rep.outcome == Outcome::BudgetExceeded {
            interrupted += 1;
        }
        let phi = rep.schedule.phi;
        let members: Vec<QFunction> = rep.survivors.iter().map(|&id| inst.class.by_id(id).expect("member").clone()).collect();
        let exact = oracle::compute_exact_values(&inst.cdp).expect("oracle");
        let learned: HashSet<_> = oracle::learned_set(&inst.cdp, &exact, &members, phi).expect("learned set");
        let (k, h) = (inst.cdp.num_actions() as f64, inst.cdp.horizon() as f64);
        for f in &members {
            let (sub, exit) = oracle::learned_set_risk(&inst.cdp, &exact, f, &learned).expect("risk");
            let bound = exit + 40.0 * k.sqrt() * phi * h * h;
            worst_margin = worst_margin.min(bound - sub);
            if sub > bound + EXACT_TOL {
                violations += 1;
            }
            checked += 1;
        }
    }
    let ok = violations == 0 && interrupted == SNAPSHOTS as usize;
    (
        ok,
        format!("{interrupted}/{SNAPSHOTS} snapshots interrupted, {checked} survivor checks, {violations} violations, smallest slack {worst_margin:.4}"),
    )
}

fn scaling_trend() -> (bool, String) {
    let mut medians = Vec::new();
    for m in [2usize, 4, 8] {
        let cfg = ExperimentConfig {
            env: EnvSpec::Random { m, k: 2, h: 3, n: 20, obs_per_state: 2, seed: None },
            algo: AlgoParams { max_states_per_level: Some(m), ..Default::default() },
            seeds: (0..SCALING_SEEDS).collect(),
            budget: None,
            output_dir: None,
        };
        let rows = harness::run_experiment(&cfg).expect("sweep");
        medians.push(median(&rows.iter().map(|r| r.episodes_total).collect::<Vec<_>>()));
    }
    let monotone = medians.windows(2).all(|w| w[0] <= w[1]);
    let ratio = medians[2] / medians[0];
    (monotone && ratio <= SCALING_MAX_RATIO, format!("medians M=2,4,8: {medians:?}, M8/M2 ratio {ratio:.2}"))
}

fn root_estimate(runs: &[SeedRun]) -> (bool, String) {
    let mut close = 0;
    let mut worst = 0.0f64;
    for r in runs {
        if let (Some(v_hat), Some(v_star)) = (r.report.v_hat_star, r.v_star) {
            let err = (v_hat - v_star).abs();
            worst = worst.max(err);
            if err <= PAC_EPSILON / 8.0 {
                close += 1;
            }
        }
    }
    (close >= PAC_REQUIRED, format!("|vHatStar - V*| <= eps/8 in {close}/{PAC_SEEDS} seeds, worst {worst:.4}"))
}

fn main() -> ExitCode {
    let mut verdicts = Vec::new();
    let mut emit = |v: Verdict| {
        report(&v);
        verdicts.push(v);
    };

    emit(timed(1, "oracle correctness", 10, oracle_correctness));
    emit(timed(2, "lock construction", 5, lock_construction));

    let start = Instant::now();
    let runs = harness::run_experiment_detailed(&pac_config()).expect("pac runs");
    let pac_time = start.elapsed();
    let mut v3 = timed(3, "PAC end-to-end", 600, || pac_end_to_end(&runs));
    v3.elapsed += pac_time;
    v3.pass &= v3.elapsed <= v3.limit;
    emit(v3);
    emit(timed(4, "structural bounds", 600, || structural_bounds(&runs)));
    emit(timed(5, "concentration", 120, concentration));
    emit(timed(6, "consensus after td-elim", 300, consensus_idempotence));
    emit(timed(7, "learned-set inequality", 60, learned_set_inequality));
    emit(timed(8, "scaling in M", 1800, scaling_trend));
    emit(timed(9, "root value estimate", 600, || root_estimate(&runs)));

    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    println!("{}/{} criteria passed", verdicts.len() - failed.len(), verdicts.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
