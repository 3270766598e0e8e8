use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::output::{self, csv_bytes, SCHEMA_VERSION};
use super::spec::{ExperimentKind, ExperimentSpec, ParameterRule, SpecErrors};
use crate::benchmarks::BenchmarkKind;
use crate::drift::{
    collect_trajectories, dominance_check, drift_bound, exit_time_experiment, martingale_report,
    DriftExperimentConfig,
};
use crate::edas::{EdaParams, Watch};
use crate::error::EdaError;
use crate::model::Borders;
use crate::runtime::{
    convergence_params, lambda_for_mu, lower_bound_mu_min, lower_bound_quantities, runtime_experiment, RuntimeExperimentConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecErrors),
    #[error("experiment failed: {0}")]
    Experiment(#[from] EdaError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv encoding: {0}")]
    Csv(#[from] csv::Error),
    #[error("json encoding: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl AssertionOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

/// In-memory results of one experiment.
#[derive(Debug, Clone)]
pub struct Artifacts {
    /// `None` for bound evaluations, which only produce JSON.
    pub csv: Option<Vec<u8>>,
    pub json: Value,
    pub assertions: Vec<AssertionOutcome>,
}

impl Artifacts {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Files written by [`run_spec`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub assertions: Vec<AssertionOutcome>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

fn drift_config(spec: &ExperimentSpec, benchmark: BenchmarkKind, watched: Vec<Watch>) -> Result<DriftExperimentConfig, EdaError> {
    Ok(DriftExperimentConfig {
        params: spec.eda_params()?,
        n: spec.n,
        r: spec.r,
        borders: spec.borders()?,
        benchmark,
        horizon: spec.horizon.unwrap_or(0),
        watched,
        trials: spec.trials,
        master_seed: spec.seed,
        workers: spec.workers,
    })
}

/// Runs the experiment described by `spec` without touching the disk.
pub fn execute(spec: &ExperimentSpec) -> Result<Artifacts, CliError> {
    let a = &spec.assertions;
    let mut checks = Vec::new();
    let (csv, json) = match spec.kind {
        ExperimentKind::Drift => {
            let config = drift_config(spec, spec.benchmark, spec.watched.clone())?;
            let stats = exit_time_experiment(&config)?;
            if let Some(sigmas) = a.exit_sigmas {
                for p in &stats.pairs {
                    let name = format!("exit_sigmas[{},{}]", p.position, p.value);
                    checks.push(match (p.bound, p.within_bound(sigmas)) {
                        (Some(b), Some(ok)) => AssertionOutcome::new(
                            &name,
                            ok,
                            format!("p_hat = {} vs bound {} + {sigmas}·√(bound/{})", p.p_hat, b, p.trials),
                        ),
                        _ => AssertionOutcome::new(&name, false, "no closed-form bound for this algorithm".into()),
                    });
                }
            }
            (Some(csv_bytes(&output::drift_rows(&stats))?), serde_json::to_value(&stats)?)
        }
        ExperimentKind::Martingale => {
            let config = drift_config(spec, spec.benchmark, spec.watched.clone())?;
            let set = collect_trajectories(&config, &spec.checkpoints, 0)?;
            let reports =
                spec.watched.iter().map(|&w| martingale_report(&set, w)).collect::<Result<Vec<_>, _>>()?;
            if let Some(limit) = a.max_deviation_se {
                for rep in &reports {
                    let worst = rep.max_abs_deviation_se();
                    checks.push(AssertionOutcome::new(
                        &format!("max_deviation_se[{},{}]", rep.position, rep.value),
                        worst <= limit,
                        format!("largest |mean − {}| = {worst} standard errors", rep.target),
                    ));
                }
            }
            (Some(csv_bytes(&output::martingale_rows(&reports))?), serde_json::to_value(&reports)?)
        }
        ExperimentKind::Dominance => {
            let t = spec.horizon.unwrap_or(0);
            let watched = vec![Watch::new(1, 0)];
            let neutral = collect_trajectories(&drift_config(spec, BenchmarkKind::Neutral, watched.clone())?, &[t], 0)?;
            let weak = collect_trajectories(&drift_config(spec, BenchmarkKind::FirstZeroBonus, watched)?, &[t], 1)?;
            let report = dominance_check(&neutral, &weak, t)?;
            if let Some(limit) = a.max_violations {
                checks.push(AssertionOutcome::new(
                    "max_violations",
                    report.violations <= limit,
                    format!("{} of {} grid points above the {}σ slack", report.violations, report.points.len(), report.sigmas),
                ));
            }
            (Some(csv_bytes(&output::dominance_rows(&report))?), serde_json::to_value(&report)?)
        }
        ExperimentKind::Runtime => runtime(spec, &mut checks)?,
        ExperimentKind::BoundEval => (None, bound_eval(spec, &mut checks)?),
    };
    Ok(Artifacts { csv, json, assertions: checks })
}

fn runtime(spec: &ExperimentSpec, checks: &mut Vec<AssertionOutcome>) -> Result<(Option<Vec<u8>>, Value), CliError> {
    let (n, r) = (spec.n, spec.r);
    let (mut config, quantities, converged_default, early_default) = match spec.parameters {
        ParameterRule::Explicit => {
            let cap = spec.budget.unwrap_or(0);
            let config = RuntimeExperimentConfig {
                n,
                r,
                lambda: spec.lambda.unwrap_or(0),
                mu: spec.mu.unwrap_or(0),
                borders: spec.borders()?,
                iteration_cap: cap,
                trials: spec.trials,
                master_seed: spec.seed,
                workers: spec.workers,
            };
            (config, Value::Null, cap.saturating_sub(1), cap)
        }
        ParameterRule::Convergence => {
            let p = convergence_params(n, r, spec.s)?;
            let config = RuntimeExperimentConfig::convergence(&p, spec.trials, spec.seed)?;
            (config, serde_json::to_value(p)?, p.iteration_budget, p.iteration_cap())
        }
        ParameterRule::LowerBound => {
            let mu = spec.mu.map_or_else(|| lower_bound_mu_min(n, r, spec.delta), |m| m as u64);
            let lambda = spec.lambda.map_or_else(|| lambda_for_mu(mu, 1.0), |l| l as u64);
            let q = lower_bound_quantities(n, r, lambda, mu, spec.delta)?;
            let config =
                RuntimeExperimentConfig::lower_bound(n, r, lambda as usize, mu as usize, &q, spec.trials, spec.seed)?;
            let cap = config.iteration_cap;
            (config, serde_json::to_value(q)?, cap.saturating_sub(1), q.iteration_lower_bound)
        }
    };
    if spec.parameters != ParameterRule::Explicit {
        if let Some(l) = spec.lambda {
            config.lambda = l;
        }
        if let Some(m) = spec.mu {
            config.mu = m;
        }
        if let Some(b) = spec.budget {
            config.iteration_cap = b;
        }
        if !spec.margins {
            config.borders = Borders::without_margins(r)?;
        }
    }
    config.workers = spec.workers;
    EdaParams::umda(config.lambda, config.mu)?;
    let records = runtime_experiment(&config)?;

    let a = &spec.assertions;
    if let Some(min) = a.min_converged {
        let within = a.converged_within.unwrap_or(converged_default);
        let ok = records
            .iter()
            .filter(|t| t.hit_at_convergence && t.converged_iter.is_some_and(|c| c <= within))
            .count();
        checks.push(AssertionOutcome::new(
            "min_converged",
            ok >= min,
            format!("{ok} of {} trials converged by iteration {within} and sampled the optimum then", records.len()),
        ));
    }
    if let Some(max) = a.max_early_hits {
        let through = a.early_hit_through.unwrap_or(early_default);
        let early = records.iter().filter(|t| t.first_hit_iter.is_some_and(|h| h <= through)).count();
        checks.push(AssertionOutcome::new(
            "max_early_hits",
            early <= max,
            format!("{early} of {} trials sampled the optimum by iteration {through}", records.len()),
        ));
    }
    if a.monotone_critical == Some(true) {
        let bad: Vec<usize> = records
            .iter()
            .filter(|t| {
                !t.critical_is_monotone()
                    || (t.converged_iter.is_some() && t.critical_trace.last() != Some(&(n + 1)))
            })
            .map(|t| t.trial)
            .collect();
        checks.push(AssertionOutcome::new(
            "monotone_critical",
            bad.is_empty(),
            format!("trials with a decreasing or incomplete critical trace: {bad:?}"),
        ));
    }

    let mut config_json = serde_json::to_value(&config)?;
    if let Some(obj) = config_json.as_object_mut() {
        obj.remove("workers");
    }
    let json = json!({
        "parameters": spec.parameters,
        "config": config_json,
        "quantities": quantities,
        "records": records,
    });
    Ok((Some(csv_bytes(&output::runtime_rows(&records))?), json))
}

fn bound_eval(spec: &ExperimentSpec, checks: &mut Vec<AssertionOutcome>) -> Result<Value, CliError> {
    Ok(match spec.parameters {
        ParameterRule::Explicit => {
            let (mu, horizon) = (spec.mu.unwrap_or(0) as u64, spec.horizon.unwrap_or(0));
            let bound = drift_bound(mu, horizon, spec.r);
            if let Some(limit) = spec.assertions.max_bound {
                checks.push(AssertionOutcome::new("max_bound", bound <= limit, format!("bound = {bound}")));
            }
            json!({ "mu": mu, "horizon": horizon, "r": spec.r, "bound": bound })
        }
        ParameterRule::Convergence => json!({ "convergence": convergence_params(spec.n, spec.r, spec.s)? }),
        ParameterRule::LowerBound => {
            let mu = spec.mu.map_or_else(|| lower_bound_mu_min(spec.n, spec.r, spec.delta), |m| m as u64);
            let lambda = spec.lambda.map_or_else(|| lambda_for_mu(mu, 1.0), |l| l as u64);
            let q = lower_bound_quantities(spec.n, spec.r, lambda, mu, spec.delta)?;
            json!({ "lambda": lambda, "mu": mu, "lower_bound": q })
        }
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Runs `spec` and writes `<kind>.csv`, `<kind>.json` and `manifest.json`
/// into `spec.out`. The manifest is written even when the experiment fails.
pub fn run_spec(spec: &ExperimentSpec) -> Result<RunSummary, CliError> {
    let dir = &spec.out;
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    let start = Instant::now();
    let result = execute(spec);
    let wall = start.elapsed().as_secs_f64();

    let stem = spec.kind.as_str();
    let mut files = Vec::new();
    let mut manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": SCHEMA_VERSION,
        "kind": stem,
        "seed": spec.seed,
        "workers": spec.workers,
        "spec": spec.to_value(),
        "wall_time_seconds": wall,
    });
    let outcome = result.and_then(|art| {
        if let Some(csv) = &art.csv {
            let path = dir.join(format!("{stem}.csv"));
            write(&path, csv)?;
            files.push(path);
        }
        let path = dir.join(format!("{stem}.json"));
        write(&path, &serde_json::to_vec_pretty(&art.json)?)?;
        files.push(path);
        Ok(art.assertions)
    });
    let manifest_path = dir.join("manifest.json");
    manifest["outputs"] = json!(files.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy()).collect::<Vec<_>>());
    match &outcome {
        Ok(assertions) => {
            manifest["assertions"] = serde_json::to_value(assertions)?;
            manifest["passed"] = json!(assertions.iter().all(|a| a.passed));
        }
        Err(e) => {
            manifest["error"] = json!(e.to_string());
            manifest["passed"] = json!(false);
        }
    }
    write(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
    let assertions = outcome?;
    Ok(RunSummary { files, manifest: manifest_path, assertions })
}
