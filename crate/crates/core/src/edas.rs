//! r-UMDA, r-PBIL and r-cGA as single-step state transitions, plus a run
//! loop with pluggable observation.
//!
//! RNG consumption per iteration is fixed so trajectories are reproducible
//! from a seed:
//!
//! * r-UMDA / r-PBIL: `λ·n` uniforms for sampling (individual-major), then
//!   one `u64` tie key per individual for selection.
//! * r-cGA: `2·n` uniforms for sampling, then one `u64` coin, drawn even
//!   when the two fitness values differ.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::benchmarks::Fitness;
use crate::error::{EdaError, Result};
use crate::model::{restrict_in_place, FrequencyMatrix, SamplingTable};
use crate::trials::TrialRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Umda,
    Pbil,
    Cga,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Umda => "umda",
            Self::Pbil => "pbil",
            Self::Cga => "cga",
        }
    }
}

/// Algorithm identity together with the parameters it actually uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum EdaParams {
    Umda { lambda: usize, mu: usize },
    Pbil { lambda: usize, mu: usize, rho: f64 },
    /// `k` is the hypothetical population size.
    Cga { k: f64 },
}

impl EdaParams {
    pub fn umda(lambda: usize, mu: usize) -> Result<Self> {
        let p = Self::Umda { lambda, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn pbil(lambda: usize, mu: usize, rho: f64) -> Result<Self> {
        let p = Self::Pbil { lambda, mu, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn cga(k: f64) -> Result<Self> {
        let p = Self::Cga { k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check_sizes = |lambda: usize, mu: usize| {
            if mu == 0 || lambda == 0 {
                return Err(EdaError::Parameter(format!("need λ ≥ 1 and μ ≥ 1, got λ = {lambda}, μ = {mu}")));
            }
            if mu > lambda {
                return Err(EdaError::Parameter(format!("μ ≤ λ violated: μ = {mu}, λ = {lambda}")));
            }
            Ok(())
        };
        match *self {
            Self::Umda { lambda, mu } => check_sizes(lambda, mu),
            Self::Pbil { lambda, mu, rho } => {
                check_sizes(lambda, mu)?;
                if !(0.0..=1.0).contains(&rho) {
                    return Err(EdaError::Parameter(format!("ρ ∈ [0, 1] violated: ρ = {rho}")));
                }
                Ok(())
            }
            Self::Cga { k } => {
                if !(k.is_finite() && k > 0.0) {
                    return Err(EdaError::Parameter(format!("K > 0 violated: K = {k}")));
                }
                Ok(())
            }
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Self::Umda { .. } => Algorithm::Umda,
            Self::Pbil { .. } => Algorithm::Pbil,
            Self::Cga { .. } => Algorithm::Cga,
        }
    }

    /// Fitness evaluations per iteration.
    pub fn samples_per_iteration(&self) -> usize {
        match *self {
            Self::Umda { lambda, .. } | Self::Pbil { lambda, .. } => lambda,
            Self::Cga { .. } => 2,
        }
    }

    pub fn mu(&self) -> Option<usize> {
        match *self {
            Self::Umda { mu, .. } | Self::Pbil { mu, .. } => Some(mu),
            Self::Cga { .. } => None,
        }
    }
}

/// `λ` sampled individuals with their fitness, stored row-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredPopulation {
    n: usize,
    genes: Vec<u8>,
    fitness: Vec<f64>,
}

impl ScoredPopulation {
    pub fn from_individuals(individuals: &[Vec<u8>], fitness: Vec<f64>) -> Result<Self> {
        let n = individuals.first().map_or(0, Vec::len);
        if individuals.len() != fitness.len() {
            return Err(EdaError::Parameter(format!(
                "{} individuals but {} fitness values",
                individuals.len(),
                fitness.len()
            )));
        }
        if let Some(bad) = individuals.iter().find(|x| x.len() != n) {
            return Err(EdaError::IndividualLength { len: bad.len(), n });
        }
        Ok(Self { n, genes: individuals.concat(), fitness })
    }

    pub fn len(&self) -> usize {
        self.fitness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fitness.is_empty()
    }

    pub fn individual(&self, k: usize) -> &[u8] {
        &self.genes[k * self.n..(k + 1) * self.n]
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn best_fitness(&self) -> Option<f64> {
        self.fitness.iter().copied().max_by(f64::total_cmp)
    }

    fn resize(&mut self, n: usize, size: usize) {
        self.n = n;
        self.genes.resize(n * size, 0);
        self.fitness.resize(size, 0.0);
    }
}

/// Indices of `mu` individuals with the highest fitness.
///
/// Every individual gets one uniform `u64` tie key; individuals are ranked
/// by fitness descending, then by key ascending. Among equal fitness values
/// at the cut, every subset is therefore equally likely. Consumes exactly
/// `pop.len()` draws, also when `mu = λ`.
pub fn select_top_mu<R: RngCore + ?Sized>(pop: &ScoredPopulation, mu: usize, rng: &mut R) -> Vec<usize> {
    let keys: Vec<u64> = (0..pop.len()).map(|_| rng.next_u64()).collect();
    let mut order: Vec<usize> = (0..pop.len()).collect();
    if mu < order.len() && mu > 0 {
        let fit = &pop.fitness;
        order.select_nth_unstable_by(mu - 1, |&x, &y| fit[y].total_cmp(&fit[x]).then(keys[x].cmp(&keys[y])));
    }
    order.truncate(mu);
    order
}

/// State of one run: parameters, model, counters and the trial's RNG stream.
#[derive(Debug, Clone)]
pub struct EdaState {
    params: EdaParams,
    model: FrequencyMatrix,
    iteration: u64,
    evaluations: u64,
    rng: TrialRng,
    population: ScoredPopulation,
}

impl EdaState {
    pub fn new(params: EdaParams, model: FrequencyMatrix, rng: TrialRng) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, model, iteration: 0, evaluations: 0, rng, population: ScoredPopulation::default() })
    }

    pub fn params(&self) -> &EdaParams {
        &self.params
    }

    pub fn model(&self) -> &FrequencyMatrix {
        &self.model
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// The most recently sampled population.
    pub fn population(&self) -> &ScoredPopulation {
        &self.population
    }

    /// Samples and evaluates this iteration's individuals.
    pub fn sample(&mut self, f: &dyn Fitness) -> &ScoredPopulation {
        let n = self.model.dimension();
        let size = self.params.samples_per_iteration();
        self.population.resize(n, size);
        let table = SamplingTable::new(&self.model);
        let pop = &mut self.population;
        for (x, fit) in pop.genes.chunks_exact_mut(n).zip(pop.fitness.iter_mut()) {
            table.fill(&mut self.rng, x);
            *fit = f.evaluate(x);
        }
        self.evaluations += size as u64;
        &self.population
    }

    /// Pre-restriction rows `p̄` (row-major) from the last sampled population.
    pub(crate) fn propose(&mut self) -> Vec<f64> {
        let (n, r) = (self.model.dimension(), self.model.cardinality());
        let pop = &self.population;
        match self.params {
            EdaParams::Umda { mu, .. } | EdaParams::Pbil { mu, .. } => {
                let selected = select_top_mu(pop, mu, &mut self.rng);
                let mut counts = vec![0u32; n * r];
                for &k in &selected {
                    for (i, &v) in pop.individual(k).iter().enumerate() {
                        counts[i * r + v as usize] += 1;
                    }
                }
                let inv_mu = 1.0 / mu as f64;
                match self.params {
                    EdaParams::Pbil { rho, .. } => counts
                        .iter()
                        .zip(self.model.rows().flatten())
                        .map(|(&c, &p)| (1.0 - rho) * p + rho * (c as f64 * inv_mu))
                        .collect(),
                    _ => counts.iter().map(|&c| c as f64 * inv_mu).collect(),
                }
            }
            EdaParams::Cga { k } => {
                let coin = self.rng.next_u64() & 1;
                let (f1, f2) = (pop.fitness[0], pop.fitness[1]);
                let first_wins = f1 > f2 || (f1 == f2 && coin == 0);
                let (winner, loser) = if first_wins { (0, 1) } else { (1, 0) };
                let step = 1.0 / k;
                let mut proposal: Vec<f64> = self.model.rows().flatten().copied().collect();
                for (i, (&w, &l)) in pop.individual(winner).iter().zip(pop.individual(loser)).enumerate() {
                    if w != l {
                        proposal[i * r + w as usize] += step;
                        proposal[i * r + l as usize] -= step;
                    }
                }
                proposal
            }
        }
    }

    /// Updates the model from the last sampled population and restricts it.
    pub fn update(&mut self) -> Result<()> {
        let proposal = self.propose();
        let r = self.model.cardinality();
        let borders = *self.model.borders();
        let rows = self.model.as_flat_mut();
        rows.copy_from_slice(&proposal);
        for (i, row) in rows.chunks_exact_mut(r).enumerate() {
            restrict_in_place(row, &borders, i)?;
        }
        self.iteration += 1;
        Ok(())
    }

    /// One full iteration of whichever algorithm the state holds.
    pub fn step(&mut self, f: &dyn Fitness) -> Result<()> {
        self.sample(f);
        self.update()
    }

    pub fn umda_step(&mut self, f: &dyn Fitness) -> Result<()> {
        self.step_as(Algorithm::Umda, f)
    }

    pub fn pbil_step(&mut self, f: &dyn Fitness) -> Result<()> {
        self.step_as(Algorithm::Pbil, f)
    }

    pub fn cga_step(&mut self, f: &dyn Fitness) -> Result<()> {
        self.step_as(Algorithm::Cga, f)
    }

    fn step_as(&mut self, expected: Algorithm, f: &dyn Fitness) -> Result<()> {
        let actual = self.params.algorithm();
        if actual != expected {
            return Err(EdaError::Parameter(format!(
                "{} step requested on a {} state",
                expected.as_str(),
                actual.as_str()
            )));
        }
        self.step(f)
    }

    #[cfg(test)]
    pub(crate) fn model_mut(&mut self) -> &mut FrequencyMatrix {
        &mut self.model
    }
}

/// What ends a run besides the budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopTarget {
    /// Run until a budget is exhausted.
    #[default]
    None,
    /// Stop once a sampled individual reaches the known optimum fitness.
    OptimumSampled,
    /// Stop once every value-0 frequency is at the upper border.
    ModelConverged,
    /// Stop once both have happened.
    ConvergedAndSampled,
}

/// Budgets and target. At least one budget must be set.
///
/// `max_iterations` caps the number of sampled populations; a budget of 0
/// leaves the initial model untouched. `max_evaluations` stops before an
/// iteration whose samples would exceed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_iterations: Option<u64>,
    pub max_evaluations: Option<u64>,
    pub target: StopTarget,
}

impl StoppingRule {
    pub fn iterations(max: u64) -> Self {
        Self { max_iterations: Some(max), ..Self::default() }
    }

    pub fn evaluations(max: u64) -> Self {
        Self { max_evaluations: Some(max), ..Self::default() }
    }

    pub fn with_target(mut self, target: StopTarget) -> Self {
        self.target = target;
        self
    }
}

/// Hooks called by [`run_observed`].
pub trait Observer {
    /// Called with `p^(t)` before iteration `t` samples.
    fn on_model(&mut self, _iteration: u64, _model: &FrequencyMatrix) {}

    /// Called with `P^(t)` right after it was sampled and evaluated.
    fn on_population(&mut self, _iteration: u64, _population: &ScoredPopulation) {}
}

impl Observer for () {}

/// Counters and milestones of a finished run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Number of sampled populations.
    pub iterations: u64,
    pub evaluations: u64,
    pub first_hit_iteration: Option<u64>,
    /// Evaluation count up to and including the first optimal sample.
    pub first_hit_evaluations: Option<u64>,
    pub converged_iteration: Option<u64>,
    /// Whether the population sampled in the convergence iteration holds the optimum.
    pub hit_at_convergence: bool,
    /// The target was reached; false means a budget ran out first.
    pub terminated: bool,
}

pub fn run_observed(
    state: &mut EdaState,
    f: &dyn Fitness,
    stop: &StoppingRule,
    observer: &mut dyn Observer,
) -> Result<RunOutcome> {
    if stop.max_iterations.is_none() && stop.max_evaluations.is_none() {
        return Err(EdaError::Parameter("stopping rule needs an iteration or evaluation budget".into()));
    }
    let optimum = f.optimum();
    let needs_optimum = matches!(stop.target, StopTarget::OptimumSampled | StopTarget::ConvergedAndSampled);
    if needs_optimum && optimum.is_none() {
        return Err(EdaError::Parameter(format!("fitness {} has no known optimum", f.name())));
    }
    let per_iteration = state.params.samples_per_iteration() as u64;
    let mut out = RunOutcome::default();

    loop {
        let t = state.iteration;
        observer.on_model(t, &state.model);
        if out.converged_iteration.is_none() && state.model.value0_converged() {
            out.converged_iteration = Some(t);
        }
        if stop.target == StopTarget::ModelConverged && out.converged_iteration.is_some() {
            out.terminated = true;
            break;
        }
        let out_of_iterations = stop.max_iterations.is_some_and(|m| out.iterations >= m);
        let out_of_evaluations = stop.max_evaluations.is_some_and(|m| state.evaluations + per_iteration > m);
        if out_of_iterations || out_of_evaluations {
            out.terminated = stop.target == StopTarget::None;
            break;
        }

        let before = state.evaluations;
        state.sample(f);
        out.iterations += 1;
        observer.on_population(t, &state.population);
        if let Some(opt) = optimum {
            if let Some(k) = state.population.fitness.iter().position(|&v| v >= opt) {
                if out.first_hit_iteration.is_none() {
                    out.first_hit_iteration = Some(t);
                    out.first_hit_evaluations = Some(before + k as u64 + 1);
                }
                if out.converged_iteration == Some(t) {
                    out.hit_at_convergence = true;
                }
            }
        }
        let reached = match stop.target {
            StopTarget::None | StopTarget::ModelConverged => false,
            StopTarget::OptimumSampled => out.first_hit_iteration.is_some(),
            StopTarget::ConvergedAndSampled => {
                out.first_hit_iteration.is_some() && out.converged_iteration.is_some()
            }
        };
        if reached {
            out.terminated = true;
            break;
        }
        state.update()?;
    }
    out.evaluations = state.evaluations;
    Ok(out)
}

/// A (position, value) pair to watch; `position` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Watch {
    pub position: usize,
    pub value: u8,
}

impl Watch {
    pub fn new(position: usize, value: u8) -> Self {
        Self { position, value }
    }

    pub fn check(&self, n: usize, r: usize) -> Result<()> {
        if self.position == 0 || self.position > n || self.value as usize >= r {
            return Err(EdaError::Parameter(format!(
                "watched pair (position {}, value {}) outside [1..{n}] × [0..{}]",
                self.position,
                self.value,
                r - 1
            )));
        }
        Ok(())
    }

    pub fn read(&self, model: &FrequencyMatrix) -> f64 {
        model.get(self.position - 1, self.value as usize)
    }
}

/// Which per-iteration observables [`run`] records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationPlan {
    pub watched: Vec<Watch>,
    /// Snapshot every `cadence` iterations, starting at 0; 0 disables snapshots.
    pub cadence: u64,
    pub critical_positions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySnapshot {
    pub iteration: u64,
    /// One value per watched pair, in plan order.
    pub values: Vec<f64>,
}

/// Full log of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub outcome: RunOutcome,
    pub snapshots: Vec<FrequencySnapshot>,
    /// Critical position of `p^(t)` for every observed `t`.
    pub critical_positions: Vec<usize>,
    pub final_model: FrequencyMatrix,
}

struct PlanRecorder<'a> {
    plan: &'a ObservationPlan,
    snapshots: Vec<FrequencySnapshot>,
    critical: Vec<usize>,
}

impl Observer for PlanRecorder<'_> {
    fn on_model(&mut self, iteration: u64, model: &FrequencyMatrix) {
        if self.plan.cadence > 0 && iteration % self.plan.cadence == 0 && !self.plan.watched.is_empty() {
            let values = self.plan.watched.iter().map(|w| w.read(model)).collect();
            self.snapshots.push(FrequencySnapshot { iteration, values });
        }
        if self.plan.critical_positions {
            self.critical.push(model.critical_position());
        }
    }
}

/// Runs `state` until `stop` and records what `plan` asks for.
pub fn run(state: &mut EdaState, f: &dyn Fitness, stop: &StoppingRule, plan: &ObservationPlan) -> Result<TrialRecord> {
    let (n, r) = (state.model.dimension(), state.model.cardinality());
    for w in &plan.watched {
        w.check(n, r)?;
    }
    let mut recorder = PlanRecorder { plan, snapshots: Vec::new(), critical: Vec::new() };
    let outcome = run_observed(state, f, stop, &mut recorder)?;
    Ok(TrialRecord {
        outcome,
        snapshots: recorder.snapshots,
        critical_positions: recorder.critical,
        final_model: state.model.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Benchmark;
    use crate::model::{restrict_row, Borders, RowUpdate};
    use crate::trials::trial_rng;
    use rand::SeedableRng;

    fn state(params: EdaParams, n: usize, r: usize, borders: Borders, seed: u64) -> EdaState {
        let model = FrequencyMatrix::new_uniform(n, r, borders).unwrap();
        EdaState::new(params, model, TrialRng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn parameter_domains() {
        assert!(EdaParams::umda(10, 11).is_err());
        assert!(EdaParams::umda(10, 0).is_err());
        assert!(EdaParams::pbil(10, 5, 1.5).is_err());
        assert!(EdaParams::cga(0.0).is_err());
        assert!(EdaParams::umda(10, 10).is_ok());
    }

    #[test]
    fn selection_without_ties() {
        let pop = ScoredPopulation::from_individuals(&[vec![0], vec![1], vec![2]], vec![3.0, 1.0, 2.0]).unwrap();
        let mut rng = trial_rng(0, 0);
        let mut picked = select_top_mu(&pop, 2, &mut rng);
        picked.sort();
        assert_eq!(picked, vec![0, 2]);
        let mut all = select_top_mu(&pop, 3, &mut rng);
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn selection_breaks_ties_uniformly() {
        let pop = ScoredPopulation::from_individuals(&vec![vec![0]; 4], vec![1.0; 4]).unwrap();
        let mut rng = trial_rng(11, 0);
        let reps = 10_000;
        let mut hits = [0usize; 4];
        for _ in 0..reps {
            for k in select_top_mu(&pop, 2, &mut rng) {
                hits[k] += 1;
            }
        }
        for h in hits {
            assert!((h as f64 / reps as f64 - 0.5).abs() <= 0.03, "{hits:?}");
        }
    }

    #[test]
    fn umda_all_zero_selection_hits_upper_border() {
        // μ = λ and a single row pinned to value 0: the whole selection has 0.
        let (n, r) = (10, 3);
        let borders = Borders::default_for(n, r).unwrap();
        let mut st = state(EdaParams::umda(20, 5).unwrap(), n, r, borders, 1);
        let pinned = FrequencyMatrix::from_rows(
            std::iter::once(vec![1.0 - 2.0 * borders.lower(), borders.lower(), borders.lower()])
                .chain(std::iter::repeat(vec![1.0 / 3.0; 3]).take(n - 1))
                .collect(),
            borders,
        )
        .unwrap();
        *st.model_mut() = pinned;
        let f = Benchmark::neutral(n, r);
        // Sampling can still produce non-zero values with probability a; retry until all are 0.
        loop {
            st.sample(&f);
            let pop = st.population();
            if (0..pop.len()).all(|k| pop.individual(k)[0] == 0) {
                break;
            }
        }
        st.update().unwrap();
        let expected = restrict_row(&RowUpdate::new(vec![1.0, 0.0, 0.0]), &borders).unwrap();
        assert_eq!(st.model().row(0), expected.as_slice());
        assert!((st.model().get(0, 0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn umda_without_margins_takes_selected_indicator() {
        let (n, r) = (3, 4);
        let borders = Borders::without_margins(r).unwrap();
        let mut st = state(EdaParams::umda(6, 6).unwrap(), n, r, borders, 2);
        *st.model_mut() = FrequencyMatrix::from_rows(
            vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.25; 4], vec![0.25; 4]],
            borders,
        )
        .unwrap();
        st.step(&Benchmark::neutral(n, r)).unwrap();
        assert_eq!(st.model().row(0), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn pre_restriction_rows_sum_to_one() {
        let (n, r) = (7, 5);
        let borders = Borders::default_for(n, r).unwrap();
        for params in [EdaParams::umda(30, 9).unwrap(), EdaParams::pbil(30, 9, 0.3).unwrap(), EdaParams::cga(7.0).unwrap()] {
            let mut st = state(params, n, r, borders, 5);
            let f = Benchmark::leading_ones(n, r);
            for _ in 0..50 {
                st.sample(&f);
                let before: Vec<f64> = st.model().rows().flatten().copied().collect();
                let proposal = st.propose();
                for (i, row) in proposal.chunks_exact(r).enumerate() {
                    let sum: f64 = row.iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-12, "{params:?} row {i} sums to {sum}");
                    if let EdaParams::Cga { k } = params {
                        let changed: Vec<f64> = row
                            .iter()
                            .zip(&before[i * r..(i + 1) * r])
                            .map(|(p, q)| p - q)
                            .filter(|d| *d != 0.0)
                            .collect();
                        assert!(changed.len() == 0 || changed.len() == 2);
                        assert!(changed.iter().all(|d| (d.abs() - 1.0 / k).abs() < 1e-12));
                    }
                }
                // finish the iteration through the public path
                let mut row_model = st.model().clone();
                for (i, row) in proposal.chunks_exact(r).enumerate() {
                    let restricted = restrict_row(&RowUpdate::new(row.to_vec()), &borders).unwrap();
                    row_model.row_mut(i).copy_from_slice(&restricted);
                }
                *st.model_mut() = row_model;
                for row in st.model().rows() {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                    assert!(row.iter().all(|&p| borders.lower() <= p && p <= borders.upper()));
                }
            }
        }
    }

    #[test]
    fn pbil_extremes() {
        let (n, r) = (6, 3);
        let borders = Borders::default_for(n, r).unwrap();
        let f = Benchmark::leading_ones(n, r);
        let mut umda = state(EdaParams::umda(20, 5).unwrap(), n, r, borders, 9);
        let mut pbil = state(EdaParams::pbil(20, 5, 1.0).unwrap(), n, r, borders, 9);
        let mut frozen = state(EdaParams::pbil(20, 5, 0.0).unwrap(), n, r, borders, 9);
        let initial = frozen.model().clone();
        for _ in 0..10 {
            umda.step(&f).unwrap();
            pbil.step(&f).unwrap();
            frozen.step(&f).unwrap();
            assert_eq!(umda.model(), pbil.model());
            assert_eq!(frozen.model(), &initial);
        }
    }

    #[test]
    fn pbil_convex_combination() {
        // row (0.2, 0.8), ρ = 0.5, all selected individuals carry value 0
        let borders = Borders::without_margins(2).unwrap();
        let mut st = state(EdaParams::pbil(3, 3, 0.5).unwrap(), 1, 2, borders, 0);
        *st.model_mut() = FrequencyMatrix::from_rows(vec![vec![0.2, 0.8]], borders).unwrap();
        st.population = ScoredPopulation::from_individuals(&[vec![0], vec![0], vec![0]], vec![0.0; 3]).unwrap();
        st.update().unwrap();
        assert!((st.model().get(0, 0) - 0.6).abs() < 1e-15);
        assert!((st.model().get(0, 1) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn cga_moves_by_one_over_k() {
        let borders = Borders::without_margins(3).unwrap();
        let mut st = state(EdaParams::cga(10.0).unwrap(), 2, 3, borders, 0);
        *st.model_mut() = FrequencyMatrix::from_rows(vec![vec![0.3, 0.3, 0.4]; 2], borders).unwrap();
        // winner has value 2 at position 1, loser 0; both agree at position 2
        st.population = ScoredPopulation::from_individuals(&[vec![2, 1], vec![0, 1]], vec![1.0, 0.0]).unwrap();
        st.update().unwrap();
        let row = st.model().row(0);
        assert!((row[0] - 0.2).abs() < 1e-15 && (row[1] - 0.3).abs() < 1e-15 && (row[2] - 0.5).abs() < 1e-15);
        assert_eq!(st.model().row(1), &[0.3, 0.3, 0.4]);
    }

    #[test]
    fn zero_budget_keeps_initial_model() {
        let borders = Borders::default_for(5, 3).unwrap();
        let mut st = state(EdaParams::umda(10, 5).unwrap(), 5, 3, borders, 0);
        let initial = st.model().clone();
        let plan = ObservationPlan { watched: vec![Watch::new(1, 0)], cadence: 1, critical_positions: true };
        let rec = run(&mut st, &Benchmark::leading_ones(5, 3), &StoppingRule::iterations(0), &plan).unwrap();
        assert_eq!(rec.final_model, initial);
        assert_eq!(rec.outcome.iterations, 0);
        assert_eq!(rec.outcome.evaluations, 0);
        assert_eq!(rec.snapshots.len(), 1);
        assert_eq!(rec.critical_positions, vec![1]);
    }

    #[test]
    fn run_requires_a_budget() {
        let borders = Borders::default_for(5, 3).unwrap();
        let mut st = state(EdaParams::umda(10, 5).unwrap(), 5, 3, borders, 0);
        let err = run(&mut st, &Benchmark::neutral(5, 3), &StoppingRule::default(), &ObservationPlan::default());
        assert!(err.is_err());
    }

    #[test]
    fn step_kind_must_match() {
        let borders = Borders::default_for(5, 3).unwrap();
        let mut st = state(EdaParams::umda(10, 5).unwrap(), 5, 3, borders, 0);
        assert!(st.cga_step(&Benchmark::neutral(5, 3)).is_err());
        assert!(st.umda_step(&Benchmark::neutral(5, 3)).is_ok());
        assert_eq!(st.evaluations(), 10);
    }
}
