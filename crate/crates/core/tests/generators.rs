use lsvee::{envgen, oracle, Path};

#[test]
fn smallest_instance_is_a_bandit() {
    let inst = envgen::make_random_realizable(1, 1, 1, 1, 1, 3).unwrap();
    assert_eq!(inst.cdp.level_sizes(), &[1]);
    assert_eq!(inst.class.len(), 1);
    let report = envgen::validate_assumptions(&inst.cdp, &inst.class).unwrap();
    assert!(report.all_hold());
    let exact = oracle::compute_exact_values(&inst.cdp).unwrap();
    let mean = inst.cdp.dist(inst.cdp.start()).support()[0].mean_reward(0);
    assert!((exact.root_value(&inst.cdp) - mean).abs() < 1e-12);
}

#[test]
fn star_member_realizes_v_star() {
    for seed in 0..10u64 {
        let inst = envgen::make_random_realizable(3, 2, 3, 8, 2, seed).unwrap();
        let exact = oracle::compute_exact_values(&inst.cdp).unwrap();
        let star = inst.class.star().unwrap();
        let pred = oracle::value_prediction_exact(&inst.cdp, &Path::root(), star).unwrap();
        assert!((pred - exact.root_value(&inst.cdp)).abs() < 1e-9);
        let value = oracle::policy_value_exact(&inst.cdp, &star.policy(inst.cdp.num_actions())).unwrap();
        assert!((value - exact.root_value(&inst.cdp)).abs() < 1e-9);
    }
}

#[test]
fn every_generated_state_is_reachable() {
    for seed in 0..10u64 {
        for inst in [
            envgen::make_random_realizable(4, 3, 3, 4, 2, seed).unwrap(),
            envgen::make_disjoint_obs(4, 3, 3, 2, 4, seed).unwrap(),
        ] {
            let reach = inst.cdp.reachable();
            assert!(reach.iter().all(|level| level.iter().all(|&r| r)), "seed {seed}");
            assert!(envgen::validate_assumptions(&inst.cdp, &inst.class).unwrap().all_hold());
        }
    }
}

#[test]
fn lock_class_is_realizable_and_rewards_the_secret_path() {
    let lock = envgen::make_lock(3, 2, 0.1, Some(vec![1, 0, 1]), 0).unwrap();
    assert!(envgen::validate_assumptions(&lock.cdp, &lock.class).unwrap().all_hold());
    let (id, value) = oracle::brute_force_policy_search(&lock.cdp, &lock.class).unwrap();
    assert_eq!(Some(id), lock.class.star_id());
    assert!((value - 0.6).abs() < 1e-12);
    assert_eq!(lock.policies.len(), 8);
}

#[test]
fn generators_are_deterministic_in_the_seed() {
    let a = envgen::make_random_realizable(3, 2, 3, 6, 2, 11).unwrap();
    let b = envgen::make_random_realizable(3, 2, 3, 6, 2, 11).unwrap();
    let c = envgen::make_random_realizable(3, 2, 3, 6, 2, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn bad_shapes_are_rejected() {
    assert!(envgen::make_random_realizable(0, 2, 2, 2, 1, 0).is_err());
    assert!(envgen::make_random_realizable(2, 0, 2, 2, 1, 0).is_err());
    assert!(envgen::make_random_realizable(2, 2, 0, 2, 1, 0).is_err());
    assert!(envgen::make_lock(2, 2, 0.6, None, 0).is_err());
}
