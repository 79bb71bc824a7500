use basket_core::allocation::{allocation_prob, assign_arm, trial_schedule, AllocationStream, DesignConfig, Phase};
use basket_core::domain::Arm;
use proptest::prelude::*;

fn share_targeted(phase: Phase, pi: Option<f64>, n: usize, seed: u64) -> f64 {
    let cfg = DesignConfig::default();
    let mut stream = AllocationStream::new(seed);
    (0..n)
        .filter(|&i| assign_arm(i, phase, pi, &cfg, &mut stream).unwrap().arm == Arm::Targeted)
        .count() as f64
        / n as f64
}

#[test]
fn clamp_examples() {
    let cfg = DesignConfig::default();
    assert_eq!(allocation_prob(0.05, &cfg).unwrap(), 0.1);
    assert_eq!(allocation_prob(0.5, &cfg).unwrap(), 0.5);
    assert_eq!(allocation_prob(0.95, &cfg).unwrap(), 0.9);
    assert!(allocation_prob(1.2, &cfg).is_err());
    assert!(allocation_prob(f64::NAN, &cfg).is_err());
}

#[test]
fn run_in_is_a_fair_coin() {
    let n = 100_000;
    let share = share_targeted(Phase::RunIn, None, n, 17);
    assert!((share - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt(), "{share}");
}

#[test]
fn certain_superiority_is_capped() {
    let n = 100_000;
    let share = share_targeted(Phase::Adaptive, Some(1.0), n, 18);
    assert!((share - 0.9).abs() <= 3.0 * (0.09 / n as f64).sqrt(), "{share}");
}

#[test]
fn phase_and_probability_must_agree() {
    let cfg = DesignConfig::default();
    let mut s = AllocationStream::new(1);
    assert!(assign_arm(0, Phase::RunIn, Some(0.5), &cfg, &mut s).is_err());
    assert!(assign_arm(0, Phase::Adaptive, None, &cfg, &mut s).is_err());
}

#[test]
fn schedule_examples() {
    assert_eq!(trial_schedule(&DesignConfig::default()), vec![100, 150, 200, 250, 300, 350]);
    let single = DesignConfig { cohort: 300, ..DesignConfig::default() };
    assert_eq!(trial_schedule(&single), vec![100]);
    let none = DesignConfig { n_run_in: 400, n_adaptive: 0, ..DesignConfig::default() };
    assert!(trial_schedule(&none).is_empty());
    assert!(DesignConfig { cohort: 70, ..DesignConfig::default() }.validate().is_err());
    assert!(DesignConfig { p_low: 0.6, p_high: 0.4, ..DesignConfig::default() }.validate().is_err());
}

#[test]
fn same_seed_same_assignments() {
    let cfg = DesignConfig::default();
    let run = |seed| {
        let mut s = AllocationStream::new(seed);
        (0..500).map(|i| assign_arm(i, Phase::Adaptive, Some(0.7), &cfg, &mut s).unwrap()).collect::<Vec<_>>()
    };
    let a = run(4);
    assert_eq!(a, run(4));
    assert_ne!(a, run(5));
    assert!(a.iter().enumerate().all(|(i, r)| r.rng_counter == i as u64));
}

proptest! {
    #[test]
    fn clamped_into_bounds(pi in 0.0f64..=1.0, lo in 0.01f64..0.5, width in 0.0f64..0.49) {
        let cfg = DesignConfig { p_low: lo, p_high: lo + width, ..DesignConfig::default() };
        let p = allocation_prob(pi, &cfg).unwrap();
        prop_assert!(p >= cfg.p_low && p <= cfg.p_high);
        if pi >= cfg.p_low && pi <= cfg.p_high {
            prop_assert_eq!(p, pi);
        }
    }

    #[test]
    fn monotone_in_pi(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let cfg = DesignConfig::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(allocation_prob(lo, &cfg).unwrap() <= allocation_prob(hi, &cfg).unwrap());
    }

    #[test]
    fn schedule_covers_the_adaptive_phase(run_in in 0usize..200, cohorts in 1usize..8, cohort in 1usize..60) {
        let cfg = DesignConfig { n_run_in: run_in, n_adaptive: cohorts * cohort, cohort, ..DesignConfig::default() };
        let s = trial_schedule(&cfg);
        prop_assert_eq!(s.len(), cohorts);
        prop_assert_eq!(s[0], run_in);
        prop_assert_eq!(*s.last().unwrap() + cohort, cfg.n_max());
    }
}
