use lsvee::cdp::{ObsRewardDist, RewardSpec, StateId};
use lsvee::rng::derive;
use lsvee::{envgen, EpisodeMeter, LayeredCdp, Observation, Policy};
use proptest::prelude::*;

fn lock_00() -> envgen::LockInstance {
    envgen::make_lock(2, 2, 0.1, Some(vec![0, 0]), 0).unwrap()
}

#[test]
fn lock_transitions_follow_the_good_path() {
    let lock = lock_00();
    assert_eq!(lock.cdp.resolve(&[]).unwrap(), lock.cdp.start());
    assert_eq!(lock.cdp.resolve(&[0]).unwrap(), StateId::new(2, 0));
    assert_eq!(lock.cdp.resolve(&[1]).unwrap(), StateId::new(2, 1));
}

#[test]
fn lock_pays_nothing_before_the_last_level() {
    let lock = envgen::make_lock(3, 2, 0.1, None, 4).unwrap();
    let mut rng = derive(1, &[]);
    let mut meter = EpisodeMeter::unlimited();
    for path in [vec![], vec![0], vec![1]] {
        for _ in 0..50 {
            let (_, r) = lock.cdp.sample_obs_reward(&path, &mut rng, &mut meter).unwrap();
            assert!(r.iter().all(|&v| v == 0.0), "nonzero reward at {path:?}");
        }
    }
    assert_eq!(meter.used(), 150);
}

struct OpenLoop(Vec<usize>);

impl Policy for OpenLoop {
    fn act(&self, x: &Observation) -> usize {
        self.0[x.history().len()]
    }
}

fn mean_return(cdp: &LayeredCdp, policy: &dyn Policy, n: u64, seed: u64) -> f64 {
    let mut rng = derive(seed, &[]);
    let mut meter = EpisodeMeter::unlimited();
    let total: f64 = (0..n).map(|_| cdp.run_episode(policy, &mut rng, &mut meter).unwrap().total_reward).sum();
    assert_eq!(meter.used(), n);
    total / n as f64
}

#[test]
fn lock_returns_are_bernoulli_with_the_right_means() {
    let lock = envgen::make_lock(3, 2, 0.1, Some(vec![1, 0, 1]), 0).unwrap();
    let n = 40_000;
    // 4 standard errors of a Bernoulli(1/2) mean.
    let tol = 4.0 * 0.5 / (n as f64).sqrt();
    let good = mean_return(&lock.cdp, &OpenLoop(vec![1, 0, 1]), n, 1);
    let early = mean_return(&lock.cdp, &OpenLoop(vec![0, 0, 1]), n, 2);
    let late = mean_return(&lock.cdp, &OpenLoop(vec![1, 0, 0]), n, 3);
    assert!((good - 0.6).abs() < tol, "{good}");
    assert!((early - 0.5).abs() < tol, "{early}");
    assert!((late - 0.5).abs() < tol, "{late}");
}

#[test]
fn deterministic_single_support_sample() {
    let d = ObsRewardDist::point(Observation::token(3), vec![RewardSpec::Deterministic { value: 0.25 }]);
    let cdp = LayeredCdp::new(1, 1, vec![1], 0, vec![], vec![vec![d]], false).unwrap();
    let mut rng = derive(0, &[]);
    let mut meter = EpisodeMeter::unlimited();
    for _ in 0..20 {
        let (x, r) = cdp.sample_obs_reward(&[], &mut rng, &mut meter).unwrap();
        assert_eq!(x.token, 3);
        assert_eq!(r, vec![0.25]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episodes_are_metered_and_bounded(seed in 0u64..10_000, m in 1usize..4, k in 1usize..4, h in 1usize..4) {
        let inst = envgen::make_random_realizable(m, k, h, 3, 2, seed).unwrap();
        let mut rng = derive(seed, &[9]);
        let mut meter = EpisodeMeter::unlimited();
        for i in 0..30u64 {
            let t = inst.cdp.run_episode_with(&mut rng, &mut meter, |_, r| rand::Rng::gen_range(r, 0..k)).unwrap();
            prop_assert_eq!(t.steps.len(), h);
            prop_assert!((0.0..=1.0).contains(&t.total_reward));
            prop_assert_eq!(meter.used(), i + 1);
        }
        for lvl in 1..=h {
            for s in inst.cdp.states_at(lvl) {
                if lvl < h {
                    for a in 0..k {
                        prop_assert_eq!(inst.cdp.next(s, a).level, lvl + 1);
                    }
                }
            }
        }
    }
}
