//! Genetic-drift experiments and the closed-form concentration bound.
//!
//! A frequency that starts at `1/r` on a neutral position leaves the band
//! `|p − 1/r| < 1/(2r)` within `T` iterations with probability at most
//! [`drift_bound`]. The same bound covers the one-sided event
//! `p_{i,0} ≤ 1/(2r)` at positions that weakly prefer value 0, via
//! stochastic dominance of such frequencies over neutral ones. This module
//! runs the matching Monte-Carlo experiments.

use serde::{Deserialize, Serialize};

use crate::benchmarks::{Benchmark, BenchmarkKind, Fitness};
use crate::edas::{run_observed, EdaParams, EdaState, Observer, StoppingRule, Watch};
use crate::error::{EdaError, Result};
use crate::model::{Borders, FrequencyMatrix};
use crate::stats::{clopper_pearson, mean_std_err};
use crate::trials::{run_trials, trial_rng};

/// Slack on the exit thresholds to absorb rounding of `k/μ`-type values.
const EXIT_TOLERANCE: f64 = 1e-12;

/// `2·exp(−μ / (12·T·r + (4/3)·r))`.
///
/// Evaluated as `2·exp(−3μ / (4r(9T + 1)))` with the quotient carried in
/// double-double precision, so the only rounding left is that of `exp` and
/// of the final product.
pub fn drift_bound(mu: u64, horizon: u64, r: usize) -> f64 {
    let num = 3.0 * mu as f64;
    let den = 4.0 * r as f64 * (9.0 * horizon as f64 + 1.0);
    let hi = num / den;
    let lo = (-hi).mul_add(den, num) / den;
    2.0 * ((-hi).exp() * (1.0 - lo))
}

/// Smallest `μ` with `drift_bound(μ, T, r) ≤ target`.
pub fn mu_for_bound(target: f64, horizon: u64, r: usize) -> u64 {
    assert!(target > 0.0 && target < 2.0, "target must be in (0, 2)");
    let scale = 12.0 * horizon as f64 * r as f64 + 4.0 * r as f64 / 3.0;
    let mut mu = ((2.0 / target).ln() * scale).floor().max(0.0) as u64;
    while drift_bound(mu, horizon, r) > target {
        mu += 1;
    }
    while mu > 0 && drift_bound(mu - 1, horizon, r) <= target {
        mu -= 1;
    }
    mu
}

/// Which departure from `1/r` counts as an exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitEvent {
    /// `|p − 1/r| ≥ 1/(2r)`, for neutral positions.
    TwoSided,
    /// `p ≤ 1/(2r)`, for value 0 at positions weakly preferring 0.
    LowerOnly,
}

impl ExitEvent {
    pub fn for_watch(f: &dyn Fitness, watch: Watch) -> Result<Self> {
        if f.is_neutral_at(watch.position) {
            Ok(Self::TwoSided)
        } else if watch.value == 0 && f.weakly_prefers(watch.position, 0) {
            Ok(Self::LowerOnly)
        } else {
            Err(EdaError::Parameter(format!(
                "{} is neither neutral at position {} nor weakly prefers 0 there",
                f.name(),
                watch.position
            )))
        }
    }

    pub fn is_exit(&self, p: f64, r: usize) -> bool {
        let center = 1.0 / r as f64;
        let radius = 0.5 / r as f64;
        match self {
            Self::TwoSided => (p - center).abs() >= radius - EXIT_TOLERANCE,
            Self::LowerOnly => p <= radius + EXIT_TOLERANCE,
        }
    }
}

/// Shared settings of the drift experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftExperimentConfig {
    pub params: EdaParams,
    pub n: usize,
    pub r: usize,
    pub borders: Borders,
    pub benchmark: BenchmarkKind,
    /// `T`: number of iterations; frequencies `p^(0)..p^(T)` are inspected.
    pub horizon: u64,
    pub watched: Vec<Watch>,
    pub trials: usize,
    pub master_seed: u64,
    pub workers: usize,
}

impl DriftExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.watched.is_empty() {
            return Err(EdaError::Parameter("no watched (position, value) pairs".into()));
        }
        if self.trials == 0 {
            return Err(EdaError::Parameter("trials must be at least 1".into()));
        }
        if self.borders.cardinality() != self.r {
            return Err(EdaError::Borders(format!(
                "borders built for r = {} used with r = {}",
                self.borders.cardinality(),
                self.r
            )));
        }
        for w in &self.watched {
            w.check(self.n, self.r)?;
        }
        Ok(())
    }

    pub fn fitness(&self) -> Benchmark {
        Benchmark::new(self.benchmark, self.n, self.r)
    }

    fn initial_state(&self, trial: usize, seed_offset: u64) -> Result<EdaState> {
        let model = FrequencyMatrix::new_uniform(self.n, self.r, self.borders)?;
        EdaState::new(self.params, model, trial_rng(self.master_seed.wrapping_add(seed_offset), trial as u64))
    }
}

/// Exit statistics of one watched pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatchExitStats {
    pub position: usize,
    pub value: u8,
    pub event: ExitEvent,
    pub trials: u64,
    pub exits: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Closed-form bound; only defined for selection-based algorithms.
    pub bound: Option<f64>,
    /// First exit iteration per trial, `None` when the band was never left.
    pub first_exit: Vec<Option<u64>>,
}

impl WatchExitStats {
    /// Whether `p_hat ≤ bound + sigmas·√(bound/trials)`.
    pub fn within_bound(&self, sigmas: f64) -> Option<bool> {
        self.bound.map(|b| self.p_hat <= b + sigmas * (b / self.trials as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub horizon: u64,
    pub mu: Option<usize>,
    pub pairs: Vec<WatchExitStats>,
}

struct ExitObserver<'a> {
    watched: &'a [Watch],
    events: &'a [ExitEvent],
    r: usize,
    first_exit: Vec<Option<u64>>,
}

impl Observer for ExitObserver<'_> {
    fn on_model(&mut self, iteration: u64, model: &FrequencyMatrix) {
        for ((w, event), slot) in self.watched.iter().zip(self.events).zip(self.first_exit.iter_mut()) {
            if slot.is_none() && event.is_exit(w.read(model), self.r) {
                *slot = Some(iteration);
            }
        }
    }
}

/// Runs `trials` independent runs for `T` iterations and counts, for every
/// watched pair, the runs whose frequency exits the band.
pub fn exit_time_experiment(config: &DriftExperimentConfig) -> Result<ExitStats> {
    config.validate()?;
    let fitness = config.fitness();
    let events =
        config.watched.iter().map(|&w| ExitEvent::for_watch(&fitness, w)).collect::<Result<Vec<_>>>()?;
    let stop = StoppingRule::iterations(config.horizon);

    let per_trial = run_trials(config.trials, config.workers, |trial| -> Result<Vec<Option<u64>>> {
        let mut state = config.initial_state(trial, 0)?;
        let mut obs =
            ExitObserver { watched: &config.watched, events: &events, r: config.r, first_exit: vec![None; events.len()] };
        run_observed(&mut state, &fitness, &stop, &mut obs)?;
        Ok(obs.first_exit)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mu = config.params.mu();
    let bound = mu.map(|mu| drift_bound(mu as u64, config.horizon, config.r));
    let pairs = config
        .watched
        .iter()
        .zip(&events)
        .enumerate()
        .map(|(k, (w, &event))| {
            let first_exit: Vec<Option<u64>> = per_trial.iter().map(|t| t[k]).collect();
            let trials = first_exit.len() as u64;
            let exits = first_exit.iter().filter(|e| e.is_some()).count() as u64;
            let (ci_lo, ci_hi) = clopper_pearson(exits, trials, 0.95);
            WatchExitStats {
                position: w.position,
                value: w.value,
                event,
                trials,
                exits,
                p_hat: exits as f64 / trials as f64,
                ci_lo,
                ci_hi,
                bound,
                first_exit,
            }
        })
        .collect();
    Ok(ExitStats { horizon: config.horizon, mu, pairs })
}

/// Watched frequencies of many runs at a set of checkpoint iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub config: DriftExperimentConfig,
    /// Sorted, deduplicated iterations at which values were logged.
    pub checkpoints: Vec<u64>,
    /// `values[trial][checkpoint][watch]`.
    pub values: Vec<Vec<Vec<f64>>>,
}

impl TrajectorySet {
    fn column(&self, iteration: u64, watch: Watch) -> Result<Vec<f64>> {
        let c = self
            .checkpoints
            .binary_search(&iteration)
            .map_err(|_| EdaError::Parameter(format!("iteration {iteration} was not logged")))?;
        let w = self
            .config
            .watched
            .iter()
            .position(|&x| x == watch)
            .ok_or_else(|| EdaError::Parameter(format!("pair {watch:?} was not watched")))?;
        Ok(self.values.iter().map(|trial| trial[c][w]).collect())
    }
}

struct CheckpointRecorder<'a> {
    watched: &'a [Watch],
    checkpoints: &'a [u64],
    rows: Vec<Vec<f64>>,
}

impl Observer for CheckpointRecorder<'_> {
    fn on_model(&mut self, iteration: u64, model: &FrequencyMatrix) {
        if self.checkpoints.binary_search(&iteration).is_ok() {
            self.rows.push(self.watched.iter().map(|w| w.read(model)).collect());
        }
    }
}

/// Runs the configured trials and logs watched frequencies at `checkpoints`.
///
/// Runs last `max(checkpoints)` iterations; `config.horizon` is ignored.
/// `seed_offset` is added to the master seed, so two sets drawn from one
/// master seed can be made independent.
pub fn collect_trajectories(
    config: &DriftExperimentConfig,
    checkpoints: &[u64],
    seed_offset: u64,
) -> Result<TrajectorySet> {
    config.validate()?;
    let mut checkpoints = checkpoints.to_vec();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let last = *checkpoints.last().ok_or_else(|| EdaError::Parameter("no checkpoints".into()))?;
    let fitness = config.fitness();
    let stop = StoppingRule::iterations(last);
    let values = run_trials(config.trials, config.workers, |trial| -> Result<Vec<Vec<f64>>> {
        let mut state = config.initial_state(trial, seed_offset)?;
        let mut rec = CheckpointRecorder { watched: &config.watched, checkpoints: &checkpoints, rows: Vec::new() };
        run_observed(&mut state, &fitness, &stop, &mut rec)?;
        Ok(rec.rows)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut config = config.clone();
    config.horizon = last;
    Ok(TrajectorySet { config, checkpoints, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominancePoint {
    pub theta: f64,
    /// Empirical `Pr[p ≤ θ]` of the weak-preference runs.
    pub cdf_weak: f64,
    /// Empirical `Pr[q ≤ θ]` of the neutral runs.
    pub cdf_neutral: f64,
    pub pooled_se: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub iteration: u64,
    pub sigmas: f64,
    pub points: Vec<DominancePoint>,
    pub violations: usize,
}

/// Number of equally spaced thresholds in `[0, 1]` used by [`dominance_check`].
pub const DOMINANCE_GRID: usize = 101;

/// Compares the empirical CDFs of the value-0 frequency at position 1 after
/// `iteration` iterations. A grid point is a violation when the
/// weak-preference CDF exceeds the neutral CDF by more than three pooled
/// standard errors of a two-proportion comparison.
pub fn dominance_check(neutral: &TrajectorySet, weak: &TrajectorySet, iteration: u64) -> Result<DominanceReport> {
    let (a, b) = (&neutral.config, &weak.config);
    if a.params != b.params || a.n != b.n || a.r != b.r || a.borders != b.borders || a.trials != b.trials {
        return Err(EdaError::Mismatch(format!(
            "neutral ({:?}, n = {}, r = {}, {} trials) vs weak preference ({:?}, n = {}, r = {}, {} trials)",
            a.params, a.n, a.r, a.trials, b.params, b.n, b.r, b.trials
        )));
    }
    let watch = Watch::new(1, 0);
    let q = neutral.column(iteration, watch)?;
    let p = weak.column(iteration, watch)?;
    let sigmas = 3.0;
    let (nq, np) = (q.len() as f64, p.len() as f64);
    let points: Vec<DominancePoint> = (0..DOMINANCE_GRID)
        .map(|k| {
            let theta = k as f64 / (DOMINANCE_GRID - 1) as f64;
            let kq = q.iter().filter(|&&v| v <= theta).count() as f64;
            let kp = p.iter().filter(|&&v| v <= theta).count() as f64;
            let pooled = (kq + kp) / (nq + np);
            let pooled_se = (pooled * (1.0 - pooled) * (1.0 / nq + 1.0 / np)).sqrt();
            let (cdf_weak, cdf_neutral) = (kp / np, kq / nq);
            DominancePoint { theta, cdf_weak, cdf_neutral, pooled_se, violation: cdf_weak - cdf_neutral > sigmas * pooled_se }
        })
        .collect();
    let violations = points.iter().filter(|p| p.violation).count();
    Ok(DominanceReport { iteration, sigmas, points, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRow {
    pub iteration: u64,
    pub mean: f64,
    pub std_err: f64,
    /// `(mean − 1/r) / std_err`; 0 when both the deviation and the error vanish.
    pub deviation_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub position: usize,
    pub value: u8,
    pub target: f64,
    pub rows: Vec<MartingaleRow>,
}

impl MartingaleReport {
    pub fn max_abs_deviation_se(&self) -> f64 {
        self.rows.iter().map(|r| r.deviation_se.abs()).fold(0.0, f64::max)
    }
}

/// Mean of the watched frequency at every checkpoint, in standard-error
/// units away from its starting value `1/r`.
pub fn martingale_report(set: &TrajectorySet, watch: Watch) -> Result<MartingaleReport> {
    let target = 1.0 / set.config.r as f64;
    let rows = set
        .checkpoints
        .iter()
        .map(|&t| {
            let (mean, std_err) = mean_std_err(&set.column(t, watch)?);
            let dev = mean - target;
            let deviation_se = if dev.abs() <= 1e-12 {
                0.0
            } else if std_err == 0.0 {
                dev.signum() * f64::INFINITY
            } else {
                dev / std_err
            };
            Ok(MartingaleRow { iteration: t, mean, std_err, deviation_se })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MartingaleReport { position: watch.position, value: watch.value, target, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(benchmark: BenchmarkKind, mu: usize, lambda: usize) -> DriftExperimentConfig {
        DriftExperimentConfig {
            params: EdaParams::umda(lambda, mu).unwrap(),
            n: 5,
            r: 4,
            borders: Borders::default_for(5, 4).unwrap(),
            benchmark,
            horizon: 10,
            watched: vec![Watch::new(1, 0), Watch::new(2, 3)],
            trials: 50,
            master_seed: 17,
            workers: 1,
        }
    }

    #[test]
    fn bound_values() {
        assert_eq!(drift_bound(0, 10, 5), 2.0);
        assert!(drift_bound(10_000, 10, 5) < drift_bound(1_000, 10, 5));
        assert!(drift_bound(1000, 20, 5) > drift_bound(1000, 10, 5));
        assert!(drift_bound(1000, 10, 6) > drift_bound(1000, 10, 5));
    }

    #[test]
    fn mu_for_bound_is_minimal() {
        let mu = mu_for_bound(0.05, 50, 5);
        assert!(drift_bound(mu, 50, 5) <= 0.05);
        assert!(drift_bound(mu - 1, 50, 5) > 0.05);
    }

    #[test]
    fn exit_events() {
        assert!(ExitEvent::TwoSided.is_exit(0.125, 4));
        assert!(ExitEvent::TwoSided.is_exit(0.375, 4));
        assert!(!ExitEvent::TwoSided.is_exit(0.3, 4));
        assert!(ExitEvent::LowerOnly.is_exit(0.125, 4));
        assert!(!ExitEvent::LowerOnly.is_exit(0.9, 4));
    }

    #[test]
    fn event_kind_follows_fitness() {
        let f = Benchmark::first_zero_bonus(5, 4);
        assert_eq!(ExitEvent::for_watch(&f, Watch::new(1, 0)).unwrap(), ExitEvent::LowerOnly);
        assert_eq!(ExitEvent::for_watch(&f, Watch::new(2, 1)).unwrap(), ExitEvent::TwoSided);
        assert!(ExitEvent::for_watch(&f, Watch::new(1, 1)).is_err());
    }

    #[test]
    fn zero_horizon_never_exits() {
        let mut c = config(BenchmarkKind::Neutral, 2, 4);
        c.horizon = 0;
        let stats = exit_time_experiment(&c).unwrap();
        assert!(stats.pairs.iter().all(|p| p.exits == 0 && p.p_hat == 0.0));
    }

    #[test]
    fn tiny_mu_drifts_out() {
        let c = config(BenchmarkKind::Neutral, 1, 2);
        let stats = exit_time_experiment(&c).unwrap();
        // μ = 1 makes every frequency jump to a border after one step
        assert!(stats.pairs.iter().all(|p| p.exits == p.trials));
        assert!(stats.pairs.iter().all(|p| p.first_exit.iter().all(|e| *e == Some(1))));
    }

    #[test]
    fn dominance_rejects_mismatch() {
        let a = collect_trajectories(&config(BenchmarkKind::Neutral, 5, 10), &[0, 3], 0).unwrap();
        let b = collect_trajectories(&config(BenchmarkKind::FirstZeroBonus, 4, 10), &[0, 3], 1).unwrap();
        assert!(matches!(dominance_check(&a, &b, 3), Err(EdaError::Mismatch(_))));
    }

    #[test]
    fn initial_cdfs_coincide() {
        let a = collect_trajectories(&config(BenchmarkKind::Neutral, 5, 10), &[0, 3], 0).unwrap();
        let b = collect_trajectories(&config(BenchmarkKind::FirstZeroBonus, 5, 10), &[0, 3], 1).unwrap();
        let rep = dominance_check(&a, &b, 0).unwrap();
        assert!(rep.points.iter().all(|p| p.cdf_weak == p.cdf_neutral));
        assert_eq!(rep.violations, 0);
        assert!(dominance_check(&a, &b, 2).is_err());
    }

    #[test]
    fn martingale_start_is_exact() {
        let set = collect_trajectories(&config(BenchmarkKind::Neutral, 5, 10), &[0, 1, 5], 0).unwrap();
        let rep = martingale_report(&set, Watch::new(1, 0)).unwrap();
        assert_eq!(rep.rows[0].mean, 0.25);
        assert_eq!(rep.rows[0].std_err, 0.0);
        assert_eq!(rep.rows[0].deviation_se, 0.0);
        assert!(martingale_report(&set, Watch::new(3, 0)).is_err());
    }
}
