use std::collections::BTreeMap;

use lsvee::algo::{compute_params, lsvee, AlgoParams, Constants, Event, Learner, Outcome, Schedule};
use lsvee::cdp::{ObsRewardDist, RewardSpec};
use lsvee::funcclass::Representation;
use lsvee::{envgen, oracle, FunctionClass, LayeredCdp, Observation, Path, QFunction};

fn constant(id: usize, value: f64) -> QFunction {
    QFunction { id, repr: Representation::Table { values: BTreeMap::new(), default: value } }
}

fn one_state(rewards: Vec<RewardSpec>) -> LayeredCdp {
    let k = rewards.len();
    let d = ObsRewardDist::point(Observation::token(0), rewards);
    LayeredCdp::new(1, k, vec![1], 0, vec![], vec![vec![d]], false).unwrap()
}

fn td_elim_events(events: &[Event]) -> Vec<&Path> {
    events
        .iter()
        .filter_map(|e| match e {
            Event::TdElim { path, .. } => Some(path),
            _ => None,
        })
        .collect()
}

#[test]
fn consensus_with_one_function_passes_and_pays() {
    let inst = envgen::make_random_realizable(2, 2, 2, 4, 2, 1).unwrap();
    let sched = compute_params(&inst.cdp, 1, &AlgoParams::default());
    let mut learner = Learner::new(&inst.cdp, sched, None, 0);
    let f = inst.class.star().unwrap().clone();
    assert!(learner.consensus(&Path(vec![0]), &[f], 0.0, 0.1).unwrap());
    assert_eq!(learner.episodes_used(), sched.n_test(0.1));
}

#[test]
fn consensus_detects_disagreeing_constants() {
    let cdp = one_state(vec![RewardSpec::zero(), RewardSpec::zero()]);
    let sched = compute_params(&cdp, 2, &AlgoParams::default());
    let mut learner = Learner::new(&cdp, sched, None, 0);
    assert!(!learner.consensus(&Path::root(), &[constant(0, 0.3), constant(1, 0.9)], 0.1, 0.1).unwrap());
    assert!((learner.cache().estimate(&Path::root(), 1).unwrap() - 0.9).abs() < 1e-9);
}

#[test]
fn td_elim_keeps_a_lone_q_star() {
    let inst = envgen::make_random_realizable(1, 2, 1, 3, 2, 2).unwrap();
    let sched = compute_params(&inst.cdp, 1, &AlgoParams::default());
    let mut learner = Learner::new(&inst.cdp, sched, None, 0);
    let star = inst.class.star().unwrap().clone();
    let kept = learner.td_elim(&Path::root(), vec![star.clone()], 0.1).unwrap();
    assert_eq!(kept, vec![star]);
}

#[test]
fn td_elim_drops_a_function_that_overpredicts() {
    let cdp = one_state(vec![RewardSpec::zero(), RewardSpec::zero()]);
    let (n_funcs, delta) = (2usize, 0.1);
    // Pick the n_train multiplier so that exactly 200 samples are drawn.
    let base = Schedule::new(0.4, delta, 1, 2, 1, n_funcs, Constants::PRACTICAL);
    let log = (4.0 * n_funcs as f64 / delta).ln();
    let constants = Constants { n_train_scale: 199.5 * base.phi * base.phi / log, ..Constants::PRACTICAL };
    let sched = Schedule::new(0.4, delta, 1, 2, 1, n_funcs, constants);
    assert_eq!(sched.n_train(delta), 200);
    assert!(sched.threshold(delta, 200) < 0.5);

    let mut learner = Learner::new(&cdp, sched, None, 0);
    let kept = learner.td_elim(&Path::root(), vec![constant(0, 0.0), constant(1, 1.0)], delta).unwrap();
    assert_eq!(kept.iter().map(|f| f.id).collect::<Vec<_>>(), vec![0]);
    assert_eq!(learner.episodes_used(), 200);
}

#[test]
fn survivors_obey_the_bias_bound() {
    let mut good_runs = 0;
    for seed in 0..20u64 {
        let inst = envgen::make_random_realizable(3, 2, 3, 20, 2, 800 + seed).unwrap();
        let (report, _) = lsvee(&inst.cdp, &inst.class, &AlgoParams::default(), seed);
        let s = &report.schedule;
        let k = (s.num_actions as f64).sqrt();
        let ok = report.survivor_trace.iter().all(|rec| {
            let level = rec.path.len() + 1;
            let tau = 20.0 * (s.horizon - level) as f64 * k * s.phi;
            let bound = 8.0 * s.phi * k + 2.0 * s.phi + tau;
            let preds: Vec<f64> = rec
                .after
                .iter()
                .map(|&id| oracle::value_prediction_exact(&inst.cdp, &rec.path, inst.class.by_id(id).unwrap()).unwrap())
                .collect();
            let spread = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - preds.iter().copied().fold(f64::INFINITY, f64::min);
            spread <= bound
        });
        if ok {
            good_runs += 1;
        }
    }
    assert!(good_runs >= 18, "{good_runs}/20");
}

#[test]
fn one_level_run_calls_td_elim_once() {
    let inst = envgen::make_random_realizable(1, 3, 1, 5, 2, 4).unwrap();
    let (report, events) = lsvee(&inst.cdp, &inst.class, &AlgoParams::default(), 0);
    assert_eq!(report.outcome, Outcome::Success);
    assert_eq!(report.td_elim_per_invocation[0], 1);
    assert_eq!(td_elim_events(&events)[0], &Path::root());
}

#[test]
fn small_runs_respect_the_td_elim_bound() {
    for seed in 0..10u64 {
        let inst = envgen::make_random_realizable(2, 2, 2, 10, 2, 50 + seed).unwrap();
        let (report, _) = lsvee(&inst.cdp, &inst.class, &AlgoParams::default(), seed);
        assert!(report.max_td_elim_per_invocation() <= 4, "seed {seed}");
        assert!(report.on_demand_iterations <= 8);
    }
}

#[test]
fn relearning_from_the_root_skips_learned_descendants() {
    let mut clean = 0;
    for seed in 0..20u64 {
        let inst = envgen::make_random_realizable(2, 2, 3, 10, 2, 900 + seed).unwrap();
        let sched = compute_params(&inst.cdp, inst.class.len(), &AlgoParams::default());
        let mut learner = Learner::new(&inst.cdp, sched, None, seed);
        let fs = learner.dfs_learn(&Path::root(), inst.class.members.clone(), 0.05).unwrap();
        let before = learner.events().len();
        learner.dfs_learn(&Path::root(), fs, 0.05).unwrap();
        let second = td_elim_events(&learner.events()[before..]);
        if second.iter().all(|p| p.is_empty()) {
            clean += 1;
        }
    }
    assert!(clean >= 18, "{clean}/20");
}

#[test]
fn on_demand_accepts_q_star_immediately() {
    let mut first_try = 0;
    for seed in 0..100u64 {
        let inst = envgen::make_random_realizable(3, 2, 3, 5, 2, 1000 + seed).unwrap();
        let v_star = oracle::compute_exact_values(&inst.cdp).unwrap().root_value(&inst.cdp);
        let sched = compute_params(&inst.cdp, inst.class.len(), &AlgoParams::default());
        let mut learner = Learner::new(&inst.cdp, sched, None, seed);
        let star = inst.class.star().unwrap().clone();
        let id = learner.explore_on_demand(vec![star.clone()], v_star, 0.05).unwrap();
        assert_eq!(id, star.id);
        let evaluations = learner.events().iter().filter(|e| matches!(e, Event::OnDemand { .. })).count();
        if evaluations == 1 {
            first_try += 1;
        }
    }
    assert!(first_try >= 95, "{first_try}/100");
}

#[test]
fn bandit_run_returns_q_star() {
    let cdp = one_state(vec![RewardSpec::Deterministic { value: 0.3 }, RewardSpec::Deterministic { value: 0.7 }]);
    let star = QFunction::table(4, [(0, vec![0.3, 0.7])].into_iter().collect());
    let other = QFunction::table(1, [(0, vec![0.9, 0.2])].into_iter().collect());
    let class = FunctionClass::new(vec![other, star], Some(1)).unwrap();
    let (report, _) = lsvee(&cdp, &class, &AlgoParams::default(), 0);
    assert_eq!(report.outcome, Outcome::Success);
    assert_eq!(report.returned_function_id, Some(4));
    let phi = report.schedule.phi;
    assert!((report.v_hat_star.unwrap() - 0.7).abs() <= phi / 12f64.sqrt());
}

#[test]
fn successful_runs_never_train_a_state_twice_per_invocation() {
    for seed in 0..10u64 {
        let inst = envgen::make_random_realizable(3, 2, 3, 20, 2, 1200 + seed).unwrap();
        let (report, _) = lsvee(&inst.cdp, &inst.class, &AlgoParams::default(), seed);
        if report.outcome == Outcome::Success {
            assert_eq!(report.repeated_td_elim_states, 0, "seed {seed}");
        }
    }
}

#[test]
fn episode_accounting_adds_up() {
    let inst = envgen::make_random_realizable(3, 2, 3, 20, 2, 77).unwrap();
    for budget in [Some(10_000), Some(300_000), None] {
        let params = AlgoParams { budget, ..Default::default() };
        let (report, events) = lsvee(&inst.cdp, &inst.class, &params, 5);
        assert_eq!(report.episodes.total, report.episodes.subroutine_sum());
        let logged: u64 = events
            .iter()
            .map(|e| match e {
                Event::Consensus { episodes, .. } | Event::TdElim { episodes, .. } | Event::OnDemand { episodes, .. } => *episodes,
            })
            .sum();
        assert!(logged <= report.episodes.total);
        if let Some(b) = budget {
            assert!(report.episodes.total <= b);
        }
    }
}
