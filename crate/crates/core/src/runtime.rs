//! Runtime experiments of the r-UMDA on r-LeadingOnes.
//!
//! Two parameter regimes are covered:
//!
//! * [`convergence_params`]: population sizes under which the value-0
//!   frequencies reach the upper border position by position, within
//!   `⌈n·ln_{2s}(2r)⌉` iterations with probability at least `1 − 2/n − o(1)`.
//! * [`lower_bound_quantities`]: the per-iteration advance `d` of the
//!   maximum selection-relevant position and the offset `ξ`, which together
//!   give an iteration before which the optimum is sampled with probability
//!   at most `4/n`.
//!
//! The experiments record the critical position (see
//! [`FrequencyMatrix::critical_position`]) and the maximum selection-relevant
//! position per iteration so both mechanisms can be inspected. Positions are
//! 1-based.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::benchmarks::Benchmark;
use crate::edas::{run_observed, EdaParams, EdaState, Observer, ScoredPopulation, StopTarget, StoppingRule};
use crate::error::{EdaError, Result};
use crate::model::{Borders, FrequencyMatrix};
use crate::trials::{run_trials, trial_rng, trial_seed};

/// Population sizes and iteration budget of the convergence regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceParams {
    /// Selection pressure `s ≥ 1`, with `λ ≥ 3·s·e·μ`.
    pub s: f64,
    pub n: usize,
    pub r: usize,
    /// `⌈24(n + 1)·r·ln(n)·(1 + ln_{2s}(r))⌉`
    pub mu_min: u64,
    /// `⌈3·s·e·μ_min⌉`
    pub lambda_min: u64,
    /// `⌈n·ln_{2s}(2r)⌉`: iterations until all value-0 frequencies are at the border.
    pub iteration_budget: u64,
    /// `⌈n·(1 + ln_{2s}(r))⌉`: horizon over which no value-0 frequency drops to `1/(2r)`.
    pub low_drift_horizon: u64,
}

impl ConvergenceParams {
    /// Iteration cap for experiments: the larger of the two horizons.
    pub fn iteration_cap(&self) -> u64 {
        self.iteration_budget.max(self.low_drift_horizon)
    }
}

fn log_base(x: f64, base: f64) -> f64 {
    x.ln() / base.ln()
}

/// Ceiling that treats values within relative `1e-12` of an integer as that
/// integer. Several formulas are exact integers in exact arithmetic (such as
/// `n·log_2(2r)` for `r` a power of two) and may land an ulp above them.
fn ceil_snapped(x: f64) -> u64 {
    let k = x.round();
    if (x - k).abs() <= 1e-12 * k.abs().max(1.0) {
        k as u64
    } else {
        x.ceil() as u64
    }
}

/// `⌈3·s·e·μ⌉`, the population size paired with selection size `μ`.
pub fn lambda_for_mu(mu: u64, s: f64) -> u64 {
    ceil_snapped(3.0 * s * E * mu as f64)
}

/// Evaluates the convergence-regime parameters; requires `n ≥ 4r`, `s ≥ 1`.
pub fn convergence_params(n: usize, r: usize, s: f64) -> Result<ConvergenceParams> {
    if r < 2 {
        return Err(EdaError::Parameter(format!("r ≥ 2 violated: r = {r}")));
    }
    if n < 4 * r {
        return Err(EdaError::Parameter(format!("n ≥ 4r violated: n = {n}, r = {r}")));
    }
    if !(s.is_finite() && s >= 1.0) {
        return Err(EdaError::Parameter(format!("s ≥ 1 violated: s = {s}")));
    }
    let (nf, rf) = (n as f64, r as f64);
    let base = 2.0 * s;
    let mu_min = ceil_snapped(24.0 * (nf + 1.0) * rf * nf.ln() * (1.0 + log_base(rf, base)));
    let lambda_min = lambda_for_mu(mu_min, s);
    let iteration_budget = ceil_snapped(nf * log_base(2.0 * rf, base));
    let low_drift_horizon = ceil_snapped(nf * (1.0 + log_base(rf, base)));
    Ok(ConvergenceParams { s, n, r, mu_min, lambda_min, iteration_budget, low_drift_horizon })
}

/// Quantities of the lower-bound regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundQuantities {
    pub delta: f64,
    /// `⌈log_{2r/3}((1 + δ)·λ/μ)⌉`
    pub d: u64,
    /// `⌈log_{2r/3}(n²·λ)⌉ + 1`
    pub xi: u64,
    /// `⌊(n − ξ)/d⌋ − 1`, clamped at 0.
    pub iteration_lower_bound: u64,
    /// `⌈max{24(n + 1)·r·ln(n), 6·(1 + δ)/δ²·ln(n)}⌉`
    pub mu_min: u64,
    /// Whether the given `μ` reaches `mu_min`.
    pub mu_condition_met: bool,
}

/// Smallest admissible `μ` of the lower-bound regime.
pub fn lower_bound_mu_min(n: usize, r: usize, delta: f64) -> u64 {
    let (nf, rf) = (n as f64, r as f64);
    let a = 24.0 * (nf + 1.0) * rf * nf.ln();
    let b = 6.0 * (1.0 + delta) / (delta * delta) * nf.ln();
    ceil_snapped(a.max(b))
}

/// Evaluates `d`, `ξ` and the iteration lower bound. A `μ` below the
/// admissible minimum is reported in the result rather than rejected.
pub fn lower_bound_quantities(n: usize, r: usize, lambda: u64, mu: u64, delta: f64) -> Result<LowerBoundQuantities> {
    if r < 2 || n < 1 {
        return Err(EdaError::Parameter(format!("need n ≥ 1 and r ≥ 2, got n = {n}, r = {r}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(EdaError::Parameter(format!("δ ∈ (0, 1) violated: δ = {delta}")));
    }
    if mu == 0 || lambda < mu {
        return Err(EdaError::Parameter(format!("λ ≥ μ ≥ 1 violated: λ = {lambda}, μ = {mu}")));
    }
    let base = 2.0 * r as f64 / 3.0;
    let d = ceil_snapped(log_base((1.0 + delta) * lambda as f64 / mu as f64, base)).max(1);
    let nf = n as f64;
    let xi = ceil_snapped(log_base(nf * nf * lambda as f64, base)) + 1;
    let iteration_lower_bound = (n as u64).saturating_sub(xi).checked_div(d).unwrap_or(0).saturating_sub(1);
    let mu_min = lower_bound_mu_min(n, r, delta);
    Ok(LowerBoundQuantities { delta, d, xi, iteration_lower_bound, mu_min, mu_condition_met: mu >= mu_min })
}

/// See [`FrequencyMatrix::critical_position`].
pub fn critical_position(model: &FrequencyMatrix) -> usize {
    model.critical_position()
}

/// Largest position `i` such that at least `μ` individuals have at least
/// `i − 1` leading 0s. Fitness values must be r-LeadingOnes values.
pub fn max_selection_relevant_position(pop: &ScoredPopulation, mu: usize) -> usize {
    let n = if pop.is_empty() { 0 } else { pop.individual(0).len() };
    if pop.is_empty() || mu == 0 || mu > pop.len() {
        return 1;
    }
    let mut fit = pop.fitness().to_vec();
    let (_, &mut mu_th, _) = fit.select_nth_unstable_by(mu - 1, |a, b| b.total_cmp(a));
    (mu_th.max(0.0) as usize + 1).min(n.max(1))
}

/// Settings of a runtime experiment on r-LeadingOnes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeExperimentConfig {
    pub n: usize,
    pub r: usize,
    pub lambda: usize,
    pub mu: usize,
    pub borders: Borders,
    /// Maximum number of sampled populations per trial.
    pub iteration_cap: u64,
    pub trials: usize,
    pub master_seed: u64,
    pub workers: usize,
}

impl RuntimeExperimentConfig {
    /// Convergence regime with `μ = μ_min`, `λ = λ_min` and a cap one past
    /// the iteration budget, so the population of the last admissible
    /// convergence iteration is still sampled.
    pub fn convergence(params: &ConvergenceParams, trials: usize, master_seed: u64) -> Result<Self> {
        Ok(Self {
            n: params.n,
            r: params.r,
            lambda: params.lambda_min as usize,
            mu: params.mu_min as usize,
            borders: Borders::default_for(params.n, params.r)?,
            iteration_cap: params.iteration_cap() + 1,
            trials,
            master_seed,
            workers: 1,
        })
    }

    /// Lower-bound regime; runs iterations `0..=iteration_lower_bound`.
    pub fn lower_bound(
        n: usize,
        r: usize,
        lambda: usize,
        mu: usize,
        quantities: &LowerBoundQuantities,
        trials: usize,
        master_seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            n,
            r,
            lambda,
            mu,
            borders: Borders::default_for(n, r)?,
            iteration_cap: quantities.iteration_lower_bound + 1,
            trials,
            master_seed,
            workers: 1,
        })
    }

    pub fn params(&self) -> Result<EdaParams> {
        EdaParams::umda(self.lambda, self.mu)
    }
}

/// Per-trial log of a runtime experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRecord {
    pub trial: usize,
    pub seed: u64,
    /// First `t` at which all value-0 frequencies are at the upper border.
    pub converged_iter: Option<u64>,
    pub first_hit_iter: Option<u64>,
    pub first_hit_evaluations: Option<u64>,
    pub hit_at_convergence: bool,
    pub evaluations: u64,
    /// The cap was reached before convergence and an optimal sample.
    pub flagged: bool,
    /// Critical position of `p^(t)` for each observed `t`.
    pub critical_trace: Vec<usize>,
    /// Maximum selection-relevant position of `P^(t)` for each sampled `t`.
    pub selection_relevant_trace: Vec<usize>,
    /// Positions whose value-0 frequency left `(1/(2r), 3/(2r))` before the
    /// position first became selection-relevant.
    pub band_violations: Vec<usize>,
}

impl RuntimeRecord {
    pub fn critical_is_monotone(&self) -> bool {
        self.critical_trace.windows(2).all(|w| w[0] <= w[1])
    }

    /// Iterations in which the maximum selection-relevant position exceeded
    /// every earlier one (starting from position 1) by more than `d`.
    pub fn selection_relevant_jumps(&self, d: u64) -> usize {
        let mut best = 1usize;
        let mut jumps = 0;
        for &m in &self.selection_relevant_trace {
            if m > best + d as usize {
                jumps += 1;
            }
            best = best.max(m);
        }
        jumps
    }
}

struct RuntimeObserver {
    n: usize,
    r: usize,
    mu: usize,
    critical: Vec<usize>,
    relevant: Vec<usize>,
    relevant_upto: usize,
    violated: Vec<bool>,
}

impl Observer for RuntimeObserver {
    fn on_model(&mut self, _iteration: u64, model: &FrequencyMatrix) {
        self.critical.push(model.critical_position());
        let (lo, hi) = (0.5 / self.r as f64, 1.5 / self.r as f64);
        for i in self.relevant_upto..self.n {
            let p = model.get(i, 0);
            if !(lo < p && p < hi) {
                self.violated[i] = true;
            }
        }
    }

    fn on_population(&mut self, _iteration: u64, population: &ScoredPopulation) {
        let m = max_selection_relevant_position(population, self.mu);
        self.relevant.push(m);
        self.relevant_upto = self.relevant_upto.max(m);
    }
}

/// Runs seeded trials of the r-UMDA on r-LeadingOnes. Each trial stops once
/// the model has converged and the optimum has been sampled, or at the cap.
/// A cap of 0 runs nothing and yields no records.
pub fn runtime_experiment(config: &RuntimeExperimentConfig) -> Result<Vec<RuntimeRecord>> {
    let params = config.params()?;
    if config.trials == 0 {
        return Err(EdaError::Parameter("trials must be at least 1".into()));
    }
    if config.iteration_cap == 0 {
        return Ok(Vec::new());
    }
    let fitness = Benchmark::leading_ones(config.n, config.r);
    let stop = StoppingRule::iterations(config.iteration_cap).with_target(StopTarget::ConvergedAndSampled);
    run_trials(config.trials, config.workers, |trial| -> Result<RuntimeRecord> {
        let model = FrequencyMatrix::new_uniform(config.n, config.r, config.borders)?;
        let mut state = EdaState::new(params, model, trial_rng(config.master_seed, trial as u64))?;
        let mut obs = RuntimeObserver {
            n: config.n,
            r: config.r,
            mu: config.mu,
            critical: Vec::new(),
            relevant: Vec::new(),
            relevant_upto: 0,
            violated: vec![false; config.n],
        };
        let outcome = run_observed(&mut state, &fitness, &stop, &mut obs)?;
        Ok(RuntimeRecord {
            trial,
            seed: trial_seed(config.master_seed, trial as u64),
            converged_iter: outcome.converged_iteration,
            first_hit_iter: outcome.first_hit_iteration,
            first_hit_evaluations: outcome.first_hit_evaluations,
            hit_at_convergence: outcome.hit_at_convergence,
            evaluations: outcome.evaluations,
            flagged: !outcome.terminated,
            critical_trace: obs.critical,
            selection_relevant_trace: obs.relevant,
            band_violations: obs.violated.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i + 1).collect(),
        })
    })
    .into_iter()
    .collect()
}
