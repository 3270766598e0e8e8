use mveda::drift::{
    collect_trajectories, dominance_check, drift_bound, exit_time_experiment, martingale_report, mu_for_bound,
    DriftExperimentConfig, ExitEvent,
};
use mveda::{Benchmark, BenchmarkKind, Borders, EdaParams, Watch};
use proptest::prelude::*;

/// Distance in units in the last place between two positive finite floats.
fn ulps(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

#[test]
fn bound_matches_high_precision_values() {
    // 60-digit evaluations of 2·exp(−μ/(12Tr + 4r/3)), rounded to nearest
    let cases: [(u64, u64, usize, f64); 8] = [
        (1000, 10, 5, 0.3847334709069487),
        (10_000, 50, 5, 0.07187727201126966),
        (1000, 50, 5, 1.4341221868081238),
        (1, 0, 2, 1.3745785575819445),
        (44_652, 24, 4, 3.508878695386392e-17),
        (123_456, 7, 3, 7.28645182413782e-210),
        (5000, 100, 2, 0.24960542520642628),
        (1_000_000, 1000, 10, 0.00048118423814171306),
    ];
    for (mu, t, r, want) in cases {
        let got = drift_bound(mu, t, r);
        assert!(ulps(got, want) <= 1, "μ={mu} T={t} r={r}: {got:e} vs {want:e}");
    }
    assert_eq!(drift_bound(0, 3, 4), 2.0);
    assert!((drift_bound(1000, 10, 5) - 0.3848).abs() < 1e-4);
}

#[test]
fn mu_for_bound_is_smallest() {
    for (target, t, r) in [(0.1, 50, 5), (0.05, 10, 3), (0.02, 1, 2)] {
        let mu = mu_for_bound(target, t, r);
        assert!(drift_bound(mu, t, r) <= target);
        assert!(drift_bound(mu - 1, t, r) > target);
    }
}

#[test]
fn binary_band_is_quarter_to_three_quarters() {
    let e = ExitEvent::TwoSided;
    assert!(e.is_exit(0.25, 2) && e.is_exit(0.75, 2) && e.is_exit(0.0, 2));
    assert!(!e.is_exit(0.26, 2) && !e.is_exit(0.5, 2) && !e.is_exit(0.74, 2));
    let lower = ExitEvent::LowerOnly;
    assert!(lower.is_exit(0.125, 4) && !lower.is_exit(0.13, 4) && !lower.is_exit(0.9, 4));
}

#[test]
fn event_follows_the_fitness() {
    let f = Benchmark::first_zero_bonus(4, 3);
    assert_eq!(ExitEvent::for_watch(&f, Watch::new(1, 0)).unwrap(), ExitEvent::LowerOnly);
    assert_eq!(ExitEvent::for_watch(&f, Watch::new(2, 1)).unwrap(), ExitEvent::TwoSided);
    assert!(ExitEvent::for_watch(&f, Watch::new(1, 1)).is_err());
}

fn config(benchmark: BenchmarkKind, n: usize, r: usize, mu: usize, lambda: usize, horizon: u64) -> DriftExperimentConfig {
    DriftExperimentConfig {
        params: EdaParams::umda(lambda, mu).unwrap(),
        n,
        r,
        borders: Borders::default_for(n, r).unwrap(),
        benchmark,
        horizon,
        watched: vec![Watch::new(1, 0)],
        trials: 400,
        master_seed: 4242,
        workers: 1,
    }
}

#[test]
fn zero_horizon_has_no_exits() {
    let stats = exit_time_experiment(&config(BenchmarkKind::Neutral, 5, 3, 2, 4, 0)).unwrap();
    assert_eq!(stats.pairs[0].exits, 0);
    assert_eq!(stats.pairs[0].p_hat, 0.0);
}

#[test]
fn neutral_exits_stay_below_bound() {
    let (r, t) = (3, 10);
    let mu = mu_for_bound(0.05, t, r) as usize;
    let stats = exit_time_experiment(&config(BenchmarkKind::Neutral, 5, r, mu, mu, t)).unwrap();
    let p = &stats.pairs[0];
    let bound = p.bound.unwrap();
    assert!(bound <= 0.05);
    assert!(p.within_bound(3.0).unwrap(), "{} exits of {}, bound {bound}", p.exits, p.trials);
    assert!(p.ci_lo <= p.p_hat && p.p_hat <= p.ci_hi);
}

#[test]
fn small_populations_drift_away() {
    let stats = exit_time_experiment(&config(BenchmarkKind::Neutral, 5, 3, 2, 4, 30)).unwrap();
    assert!(stats.pairs[0].p_hat > 0.9, "{}", stats.pairs[0].p_hat);
}

#[test]
fn worker_count_does_not_change_results() {
    let mut c = config(BenchmarkKind::FirstZeroBonus, 6, 4, 10, 20, 15);
    c.trials = 64;
    let one = exit_time_experiment(&c).unwrap();
    c.workers = 4;
    assert_eq!(one, exit_time_experiment(&c).unwrap());
}

#[test]
fn dominance_base_case_and_symmetry() {
    let mut neutral = config(BenchmarkKind::Neutral, 6, 4, 10, 20, 0);
    neutral.trials = 500;
    let set0 = collect_trajectories(&neutral, &[0, 8], 0).unwrap();
    let set1 = collect_trajectories(&neutral, &[0, 8], 1).unwrap();
    let at0 = dominance_check(&set0, &set1, 0).unwrap();
    assert!(at0.points.iter().all(|p| p.cdf_weak == p.cdf_neutral));
    assert_eq!(at0.points.len(), 101);
    let at8 = dominance_check(&set0, &set1, 8).unwrap();
    assert_eq!(at8.violations, 0);

    let mut other = neutral.clone();
    other.trials = 499;
    let set2 = collect_trajectories(&other, &[0], 0).unwrap();
    assert!(dominance_check(&set0, &set2, 0).is_err());
}

#[test]
fn martingale_starts_exactly_at_uniform() {
    let mut c = config(BenchmarkKind::Neutral, 4, 4, 3, 6, 0);
    c.borders = Borders::without_margins(4).unwrap();
    c.trials = 200;
    let set = collect_trajectories(&c, &[0, 3], 0).unwrap();
    let rep = martingale_report(&set, Watch::new(1, 0)).unwrap();
    assert_eq!(rep.rows[0].mean, 0.25);
    assert_eq!(rep.rows[0].std_err, 0.0);
    assert_eq!(rep.rows[0].deviation_se, 0.0);
    assert!(rep.rows[1].deviation_se.abs() < 4.0);
}

proptest! {
    #[test]
    fn bound_is_monotone(mu in 0u64..50_000, t in 0u64..200, r in 2usize..64) {
        // keep the exponent away from underflow
        prop_assume!((mu as f64) / (12.0 * t as f64 * r as f64 + 4.0 * r as f64 / 3.0) < 600.0);
        let b = drift_bound(mu, t, r);
        prop_assert!(b > 0.0 && b <= 2.0);
        prop_assert!(drift_bound(mu + 1, t, r) <= b);
        prop_assert!(drift_bound(mu, t + 1, r) >= b);
        prop_assert!(drift_bound(mu, t, r + 1) >= b);
    }
}
