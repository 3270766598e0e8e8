use mveda::edas::{run, run_observed, select_top_mu, ScoredPopulation};
use mveda::trials::{trial_rng, TrialRng};
use mveda::{
    Benchmark, Borders, EdaParams, EdaState, FrequencyMatrix, ObservationPlan, StopTarget, StoppingRule, Watch,
};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};

fn fresh(params: EdaParams, n: usize, r: usize, borders: Borders, seed: u64) -> EdaState {
    let model = FrequencyMatrix::new_uniform(n, r, borders).unwrap();
    EdaState::new(params, model, TrialRng::seed_from_u64(seed)).unwrap()
}

/// Classical binary UMDA on LeadingOnes (counting 1s) with margins
/// `[1/n, 1 − 1/n]`. Bit 1 plays the role of value 0. Uses the same stream
/// layout: λ·n uniforms, then one tie key per individual.
struct BinaryUmda {
    q: Vec<f64>,
    lambda: usize,
    mu: usize,
    rng: TrialRng,
}

impl BinaryUmda {
    fn step(&mut self) {
        let n = self.q.len();
        let pop: Vec<Vec<u8>> =
            (0..self.lambda).map(|_| self.q.iter().map(|&q| (self.rng.gen::<f64>() < q) as u8).collect()).collect();
        let fit: Vec<usize> = pop.iter().map(|x| x.iter().take_while(|&&b| b == 1).count()).collect();
        let keys: Vec<u64> = (0..self.lambda).map(|_| self.rng.next_u64()).collect();
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| fit[b].cmp(&fit[a]).then(keys[a].cmp(&keys[b])));
        let lo = 1.0 / n as f64;
        for i in 0..n {
            let ones = order[..self.mu].iter().filter(|&&k| pop[k][i] == 1).count();
            self.q[i] = (ones as f64 / self.mu as f64).clamp(lo, 1.0 - lo);
        }
    }
}

#[test]
fn binary_case_follows_classical_umda() {
    let (n, lambda, mu) = (8, 24, 6);
    let f = Benchmark::leading_ones(n, 2);
    for seed in 0..20 {
        let mut state = fresh(EdaParams::umda(lambda, mu).unwrap(), n, 2, Borders::default_for(n, 2).unwrap(), seed);
        let mut oracle = BinaryUmda { q: vec![0.5; n], lambda, mu, rng: TrialRng::seed_from_u64(seed) };
        for t in 0..40 {
            state.umda_step(&f).unwrap();
            oracle.step();
            for i in 0..n {
                let p = state.model().get(i, 0);
                assert!((p - oracle.q[i]).abs() < 1e-12, "seed {seed}, t {t}, position {}: {p} vs {}", i + 1, oracle.q[i]);
            }
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let f = Benchmark::leading_ones(10, 3);
    let plan = ObservationPlan { watched: vec![Watch::new(1, 0), Watch::new(4, 2)], cadence: 1, critical_positions: true };
    let stop = StoppingRule::iterations(60).with_target(StopTarget::OptimumSampled);
    let record = |seed| {
        let mut s = fresh(EdaParams::umda(30, 10).unwrap(), 10, 3, Borders::default_for(10, 3).unwrap(), seed);
        serde_json::to_vec(&run(&mut s, &f, &stop, &plan).unwrap()).unwrap()
    };
    assert_eq!(record(5), record(5));
    assert_ne!(record(5), record(6));
}

#[test]
fn zero_budget_keeps_initial_model() {
    let f = Benchmark::neutral(4, 3);
    let mut s = fresh(EdaParams::cga(10.0).unwrap(), 4, 3, Borders::default_for(4, 3).unwrap(), 1);
    let rec = run(&mut s, &f, &StoppingRule::iterations(0), &ObservationPlan::default()).unwrap();
    assert_eq!(rec.outcome.iterations, 0);
    assert_eq!(rec.final_model, FrequencyMatrix::new_uniform(4, 3, Borders::default_for(4, 3).unwrap()).unwrap());
}

#[test]
fn evaluation_accounting() {
    let f = Benchmark::neutral(5, 4);
    let b = Borders::default_for(5, 4).unwrap();
    for (params, per) in [
        (EdaParams::umda(12, 3).unwrap(), 12),
        (EdaParams::pbil(7, 2, 0.3).unwrap(), 7),
        (EdaParams::cga(20.0).unwrap(), 2),
    ] {
        let mut s = fresh(params, 5, 4, b, 2);
        for t in 1..=9u64 {
            s.step(&f).unwrap();
            assert_eq!((s.iteration(), s.evaluations()), (t, t * per));
        }
    }
}

#[test]
fn pbil_with_full_weight_is_umda() {
    let f = Benchmark::leading_ones(6, 4);
    let b = Borders::default_for(6, 4).unwrap();
    let mut u = fresh(EdaParams::umda(20, 5).unwrap(), 6, 4, b, 77);
    let mut p = fresh(EdaParams::pbil(20, 5, 1.0).unwrap(), 6, 4, b, 77);
    for _ in 0..25 {
        u.umda_step(&f).unwrap();
        p.pbil_step(&f).unwrap();
        assert_eq!(u.model(), p.model());
    }
}

#[test]
fn cga_moves_entries_by_one_over_k() {
    let (n, r, k) = (6, 4, 50.0);
    let f = Benchmark::leading_ones(n, r);
    let mut s = fresh(EdaParams::cga(k).unwrap(), n, r, Borders::without_margins(r).unwrap(), 3);
    for _ in 0..10 {
        let before = s.model().clone();
        s.cga_step(&f).unwrap();
        for i in 0..n {
            let diffs: Vec<f64> =
                (0..r).map(|j| s.model().get(i, j) - before.get(i, j)).filter(|d| d.abs() > 1e-15).collect();
            assert!(diffs.len() == 0 || diffs.len() == 2, "{diffs:?}");
            for d in diffs {
                assert!((d.abs() - 1.0 / k).abs() < 1e-12, "{d}");
            }
        }
    }
}

#[test]
fn neutral_frequencies_are_martingales() {
    // 9 pairs × 3 checkpoints; 4 standard errors keeps the family-wise false alarm rate small
    let (n, r, trials) = (3, 3, 4000u64);
    let f = Benchmark::neutral(n, r);
    let watched: Vec<Watch> = (1..=n).flat_map(|i| (0..r as u8).map(move |j| Watch::new(i, j))).collect();
    let plan = ObservationPlan { watched: watched.clone(), cadence: 1, critical_positions: false };
    let stop = StoppingRule::iterations(10);
    let mut sums = vec![[0.0f64; 3]; watched.len()];
    let mut squares = vec![[0.0f64; 3]; watched.len()];
    for t in 0..trials {
        let model = FrequencyMatrix::new_uniform(n, r, Borders::without_margins(r).unwrap()).unwrap();
        let mut s = EdaState::new(EdaParams::umda(10, 5).unwrap(), model, trial_rng(99, t)).unwrap();
        let rec = run(&mut s, &f, &stop, &plan).unwrap();
        for (c, it) in [1usize, 5, 10].into_iter().enumerate() {
            for (w, v) in rec.snapshots[it].values.iter().enumerate() {
                sums[w][c] += v;
                squares[w][c] += v * v;
            }
        }
    }
    let n_t = trials as f64;
    for w in 0..watched.len() {
        for c in 0..3 {
            let mean = sums[w][c] / n_t;
            let var = (squares[w][c] - n_t * mean * mean) / (n_t - 1.0);
            let se = (var / n_t).sqrt();
            assert!((mean - 1.0 / 3.0).abs() <= 4.0 * se, "{:?}: mean {mean}, se {se}", watched[w]);
        }
    }
}

#[test]
fn run_needs_budget_and_known_optimum() {
    let f = Benchmark::neutral(3, 2);
    let mut s = fresh(EdaParams::umda(4, 2).unwrap(), 3, 2, Borders::default_for(3, 2).unwrap(), 0);
    let unbounded = StoppingRule { max_iterations: None, max_evaluations: None, target: StopTarget::None };
    assert!(run_observed(&mut s, &f, &unbounded, &mut ()).is_err());
    let lo = Benchmark::leading_ones(3, 2);
    let until_hit = StoppingRule::evaluations(1000).with_target(StopTarget::OptimumSampled);
    let out = run_observed(&mut s, &lo, &until_hit, &mut ()).unwrap();
    assert!(out.terminated && out.first_hit_iteration.is_some());
    assert!(out.first_hit_evaluations.unwrap() <= out.evaluations);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn selection_ignores_monotone_transforms(
        fit in prop::collection::vec(0u8..5, 1..40),
        mu_frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let lambda = fit.len();
        let mu = ((mu_frac * lambda as f64) as usize).clamp(1, lambda);
        let genes = vec![vec![0u8]; lambda];
        let raw: Vec<f64> = fit.iter().map(|&v| v as f64).collect();
        let shifted: Vec<f64> = raw.iter().map(|v| 3.0 * v - 7.0).collect();
        let cubed: Vec<f64> = raw.iter().map(|v| v.powi(3) + 0.5).collect();
        let pick = |f: Vec<f64>| {
            let pop = ScoredPopulation::from_individuals(&genes, f).unwrap();
            let mut sel = select_top_mu(&pop, mu, &mut TrialRng::seed_from_u64(seed));
            sel.sort_unstable();
            sel
        };
        let base = pick(raw.clone());
        prop_assert_eq!(&base, &pick(shifted));
        prop_assert_eq!(&base, &pick(cubed));
        // every selected fitness ≥ every rejected one
        let worst_in = base.iter().map(|&k| raw[k]).fold(f64::INFINITY, f64::min);
        let best_out = (0..lambda).filter(|k| !base.contains(k)).map(|k| raw[k]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(worst_in >= best_out);
    }

    #[test]
    fn steps_keep_rows_on_the_clamped_simplex(
        algo in 0u8..3,
        n in 2usize..8,
        r in 2usize..7,
        margins in any::<bool>(),
        steps in 1usize..12,
        seed in any::<u64>(),
    ) {
        prop_assume!(!(margins && n == 2 && r == 2));
        let params = match algo {
            0 => EdaParams::umda(12, 4).unwrap(),
            1 => EdaParams::pbil(12, 4, 0.35).unwrap(),
            _ => EdaParams::cga(7.0).unwrap(),
        };
        let borders = if margins { Borders::default_for(n, r).unwrap() } else { Borders::without_margins(r).unwrap() };
        let f = Benchmark::leading_ones(n, r);
        let mut s = fresh(params, n, r, borders, seed);
        for _ in 0..steps {
            s.step(&f).unwrap();
            for row in s.model().rows() {
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
                for &p in row {
                    prop_assert!(borders.lower() <= p && p <= borders.upper());
                }
            }
        }
    }
}
