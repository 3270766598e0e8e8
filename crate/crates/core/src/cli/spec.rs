//! Experiment specification documents.
//!
//! A spec is a JSON object. Keys:
//!
//! | key          | type            | default                         | used by |
//! |--------------|-----------------|---------------------------------|---------|
//! | `kind`       | string          | required                        | all: `drift`, `dominance`, `martingale`, `runtime`, `bound` (alias `bound_eval`) |
//! | `seed`       | u64             | required                        | all but `bound` |
//! | `algorithm`  | string          | `"umda"`                        | drift, dominance, martingale: `umda`, `pbil`, `cga` |
//! | `lambda`     | count           | required for umda/pbil          | |
//! | `mu`         | count           | required for umda/pbil          | also `bound` |
//! | `rho`        | real in [0,1]   | required for pbil               | |
//! | `k`          | real > 0        | required for cga                | |
//! | `benchmark`  | string          | `"neutral"`                     | drift, martingale |
//! | `n`, `r`     | counts          | required (`bound` needs `r`)    | |
//! | `margins`    | bool            | `false` for martingale, else `true` | |
//! | `horizon`    | iterations      | required for drift, dominance, bound | dominance compares at `t = horizon` |
//! | `checkpoints`| list of iterations | `1..=horizon`                | martingale |
//! | `parameters` | string          | `"explicit"`                    | runtime, bound: `explicit`, `convergence`, `lower_bound` |
//! | `s`          | real ≥ 1        | `1`                             | `convergence` |
//! | `delta`      | real in (0,1)   | `0.5`                           | `lower_bound` |
//! | `budget`     | iterations      | derived from `parameters`       | runtime iteration cap |
//! | `trials`     | count ≥ 1       | `100`                           | |
//! | `watched`    | `[[pos, val]]`  | `[[1, 0]]`                      | drift, martingale (1-based positions) |
//! | `workers`    | count ≥ 1       | `1`                             | |
//! | `out`        | path            | `"results"`                     | |
//! | `assert`     | object          | none                            | see [`Assertions`] |
//!
//! Unknown keys are rejected with a suggestion for the closest known key.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::benchmarks::BenchmarkKind;
use crate::edas::{Algorithm, EdaParams, Watch};
use crate::model::{Borders, MAX_CARDINALITY};

const KEYS: &[&str] = &[
    "kind",
    "seed",
    "algorithm",
    "lambda",
    "mu",
    "rho",
    "k",
    "benchmark",
    "n",
    "r",
    "margins",
    "horizon",
    "checkpoints",
    "parameters",
    "s",
    "delta",
    "budget",
    "trials",
    "watched",
    "workers",
    "out",
    "assert",
];

const ASSERT_KEYS: &[&str] = &[
    "exit_sigmas",
    "max_deviation_se",
    "max_violations",
    "min_converged",
    "converged_within",
    "max_early_hits",
    "early_hit_through",
    "monotone_critical",
    "max_bound",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Drift,
    Dominance,
    Martingale,
    Runtime,
    BoundEval,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "drift" => Self::Drift,
            "dominance" => Self::Dominance,
            "martingale" => Self::Martingale,
            "runtime" => Self::Runtime,
            "bound" | "bound_eval" => Self::BoundEval,
            _ => return None,
        })
    }

    /// File stem of the outputs.
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Drift => "drift",
            Self::Dominance => "dominance",
            Self::Martingale => "martingale",
            Self::Runtime => "runtime",
            Self::BoundEval => "bound",
        }
    }
}

/// How runtime and bound specs obtain λ, μ and the iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterRule {
    Explicit,
    /// Convergence regime, driven by `s`.
    Convergence,
    /// No-early-optimum regime, driven by `delta`.
    LowerBound,
}

/// Optional checks evaluated after a run; any failure makes the exit status
/// nonzero.
///
/// - `exit_sigmas` (drift): every exit probability `≤ bound + σ·√(bound/trials)`.
/// - `max_deviation_se` (martingale): every mean within that many standard errors of `1/r`.
/// - `max_violations` (dominance): CDF grid points allowed above the slack.
/// - `min_converged`, `converged_within` (runtime): at least that many trials converge by
///   the given iteration (default: the iteration budget) and sample the optimum then.
/// - `max_early_hits`, `early_hit_through` (runtime): at most that many trials sample the
///   optimum at or before the given iteration (default: the lower bound).
/// - `monotone_critical` (runtime): the critical position never decreases, and reaches
///   `n + 1` in converged trials.
/// - `max_bound` (bound): the evaluated drift bound does not exceed this.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assertions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit_sigmas: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_deviation_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_converged: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged_within: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_early_hits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_hit_through: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotone_critical: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_bound: Option<f64>,
}

impl Assertions {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// A validated experiment spec with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub algorithm: Algorithm,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub benchmark: BenchmarkKind,
    pub n: usize,
    pub r: usize,
    pub margins: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    pub checkpoints: Vec<u64>,
    pub parameters: ParameterRule,
    pub s: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    pub trials: usize,
    #[serde(serialize_with = "watched_as_pairs")]
    pub watched: Vec<Watch>,
    pub workers: usize,
    pub out: PathBuf,
    #[serde(default, rename = "assert", skip_serializing_if = "Assertions::is_empty")]
    pub assertions: Assertions,
}

// same `[position, value]` layout the parser accepts
fn watched_as_pairs<S: serde::Serializer>(watched: &[Watch], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(watched.iter().map(|w| (w.position, w.value)))
}

impl ExperimentSpec {
    /// The spec as JSON that [`parse_spec_value`] accepts back unchanged.
    pub fn to_value(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("spec serializes");
        let map = v.as_object_mut().expect("spec is an object");
        if self.n == 0 {
            map.remove("n");
        }
        if self.r == 0 {
            map.remove("r");
        }
        if self.checkpoints.is_empty() {
            map.remove("checkpoints");
        }
        if self.kind == ExperimentKind::Dominance {
            map.remove("benchmark");
        }
        v
    }

    /// Algorithm parameters of drift-style specs; runtime specs always use the r-UMDA.
    pub fn eda_params(&self) -> crate::Result<EdaParams> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| crate::EdaError::Parameter(format!("{name} is required")))
        };
        match self.algorithm {
            Algorithm::Umda => EdaParams::umda(need(self.lambda, "lambda")?, need(self.mu, "mu")?),
            Algorithm::Pbil => EdaParams::pbil(
                need(self.lambda, "lambda")?,
                need(self.mu, "mu")?,
                self.rho.ok_or_else(|| crate::EdaError::Parameter("rho is required".into()))?,
            ),
            Algorithm::Cga => {
                EdaParams::cga(self.k.ok_or_else(|| crate::EdaError::Parameter("k is required".into()))?)
            }
        }
    }

    pub fn borders(&self) -> crate::Result<Borders> {
        if self.margins {
            Borders::default_for(self.n, self.r)
        } else {
            Borders::without_margins(self.r)
        }
    }
}

/// Every problem found in a spec document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecErrors(pub Vec<String>);

impl std::fmt::Display for SpecErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid experiment spec:")?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SpecErrors {}

/// Parses and validates a JSON spec document.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecErrors> {
    let value: Value = serde_json::from_str(text).map_err(|e| SpecErrors(vec![format!("malformed JSON: {e}")]))?;
    parse_spec_value(&value)
}

fn suggest(key: &str, known: &[&str]) -> String {
    let best = known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .min()
        .filter(|(d, k)| *d <= 2.max(k.len() / 3));
    match best {
        Some((_, k)) => format!("unknown key \"{key}\" (did you mean \"{k}\"?)"),
        None => format!("unknown key \"{key}\""),
    }
}

struct Reader<'a> {
    map: &'a Map<String, Value>,
    errors: Vec<String>,
    prefix: &'static str,
}

impl<'a> Reader<'a> {
    fn new(map: &'a Map<String, Value>, known: &[&str], prefix: &'static str) -> Self {
        let errors = map.keys().filter(|k| !known.contains(&k.as_str())).map(|k| suggest(k, known)).collect();
        Self { map, errors, prefix }
    }

    fn fail(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{}{key}: {msg}", self.prefix));
    }

    fn get<T>(&mut self, key: &str, what: &str, conv: impl Fn(&Value) -> Option<T>) -> Option<T> {
        let v = self.map.get(key)?;
        let out = conv(v);
        if out.is_none() {
            self.fail(key, format!("expected {what}, found {v}"));
        }
        out
    }

    fn u64(&mut self, key: &str) -> Option<u64> {
        self.get(key, "a non-negative integer", Value::as_u64)
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        self.get(key, "a non-negative integer", |v| v.as_u64().and_then(|x| usize::try_from(x).ok()))
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        self.get(key, "a number", Value::as_f64)
    }

    fn bool(&mut self, key: &str) -> Option<bool> {
        self.get(key, "true or false", Value::as_bool)
    }

    fn str(&mut self, key: &str) -> Option<&'a str> {
        let map = self.map;
        let v = map.get(key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.fail(key, format!("expected a string, found {v}"));
                None
            }
        }
    }
}

/// Validates an already parsed JSON value; see [`parse_spec`].
pub fn parse_spec_value(value: &Value) -> Result<ExperimentSpec, SpecErrors> {
    let Some(map) = value.as_object() else {
        return Err(SpecErrors(vec!["spec must be a JSON object".into()]));
    };
    let mut rd = Reader::new(map, KEYS, "");

    let kind = match rd.str("kind") {
        Some(s) => ExperimentKind::parse(s).or_else(|| {
            rd.fail("kind", format!("unknown experiment kind \"{s}\""));
            None
        }),
        None => {
            if !map.contains_key("kind") {
                rd.errors.push("kind: required".into());
            }
            None
        }
    };
    let seed = rd.u64("seed");
    let algorithm = match rd.str("algorithm") {
        None => Some(Algorithm::Umda),
        Some("umda") => Some(Algorithm::Umda),
        Some("pbil") => Some(Algorithm::Pbil),
        Some("cga") => Some(Algorithm::Cga),
        Some(s) => {
            rd.fail("algorithm", format!("unknown algorithm \"{s}\" (expected umda, pbil or cga)"));
            None
        }
    };
    let lambda = rd.usize("lambda");
    let mu = rd.usize("mu");
    let rho = rd.f64("rho");
    let k = rd.f64("k");
    let benchmark = match rd.str("benchmark") {
        None => Some(if kind == Some(ExperimentKind::Runtime) {
            BenchmarkKind::LeadingOnes
        } else {
            BenchmarkKind::Neutral
        }),
        Some(s) => s.parse::<BenchmarkKind>().map_err(|e| rd.fail("benchmark", e)).ok(),
    };
    let n = rd.usize("n");
    let r = rd.usize("r");
    let margins = rd.bool("margins").unwrap_or(kind != Some(ExperimentKind::Martingale));
    let horizon = rd.u64("horizon");
    let checkpoints = match map.get("checkpoints") {
        None => None,
        Some(v) => {
            let list = v.as_array().and_then(|a| a.iter().map(Value::as_u64).collect::<Option<Vec<_>>>());
            if list.is_none() {
                rd.fail("checkpoints", format!("expected a list of iterations, found {v}"));
            }
            list
        }
    };
    let parameters = match rd.str("parameters") {
        None | Some("explicit") => Some(ParameterRule::Explicit),
        Some("convergence") => Some(ParameterRule::Convergence),
        Some("lower_bound") => Some(ParameterRule::LowerBound),
        Some(s) => {
            rd.fail("parameters", format!("unknown rule \"{s}\" (expected explicit, convergence or lower_bound)"));
            None
        }
    };
    let s = rd.f64("s").unwrap_or(1.0);
    let delta = rd.f64("delta").unwrap_or(0.5);
    let budget = rd.u64("budget");
    let trials = rd.usize("trials").unwrap_or(100);
    let watched = match map.get("watched") {
        None => Some(vec![Watch::new(1, 0)]),
        Some(v) => {
            let list = v.as_array().and_then(|a| {
                a.iter()
                    .map(|p| match p.as_array().map(Vec::as_slice) {
                        Some([i, j]) => {
                            let i = usize::try_from(i.as_u64()?).ok()?;
                            let j = u8::try_from(j.as_u64()?).ok()?;
                            Some(Watch::new(i, j))
                        }
                        _ => None,
                    })
                    .collect::<Option<Vec<_>>>()
            });
            if list.is_none() {
                rd.fail("watched", format!("expected a list of [position, value] pairs, found {v}"));
            }
            list
        }
    };
    let workers = rd.usize("workers").unwrap_or(1);
    let out = rd.str("out").unwrap_or("results").into();
    let assertions = match map.get("assert") {
        None => Assertions::default(),
        Some(Value::Object(a)) => {
            let mut ar = Reader::new(a, ASSERT_KEYS, "assert.");
            let parsed = Assertions {
                exit_sigmas: ar.f64("exit_sigmas"),
                max_deviation_se: ar.f64("max_deviation_se"),
                max_violations: ar.usize("max_violations"),
                min_converged: ar.usize("min_converged"),
                converged_within: ar.u64("converged_within"),
                max_early_hits: ar.usize("max_early_hits"),
                early_hit_through: ar.u64("early_hit_through"),
                monotone_critical: ar.bool("monotone_critical"),
                max_bound: ar.f64("max_bound"),
            };
            rd.errors.extend(ar.errors.into_iter().map(|e| {
                if e.starts_with("unknown key") {
                    format!("assert: {e}")
                } else {
                    e
                }
            }));
            parsed
        }
        Some(v) => {
            rd.fail("assert", format!("expected an object, found {v}"));
            Assertions::default()
        }
    };
    let mut errors = rd.errors;

    // Bail out early when the basic shape is wrong; range checks below
    // assume the typed values exist.
    let (Some(kind), Some(algorithm), Some(benchmark), Some(parameters), Some(watched)) =
        (kind, algorithm, benchmark, parameters, watched)
    else {
        return Err(SpecErrors(errors));
    };

    let mut require = |present: bool, key: &str| {
        if !present {
            errors.push(format!("{key}: required for {} specs", kind.as_str()));
        }
    };
    match kind {
        ExperimentKind::BoundEval => {
            require(r.is_some(), "r");
            match parameters {
                ParameterRule::Explicit => {
                    require(mu.is_some(), "mu");
                    require(horizon.is_some(), "horizon");
                }
                _ => require(n.is_some(), "n"),
            }
        }
        _ => {
            require(seed.is_some(), "seed");
            require(n.is_some(), "n");
            require(r.is_some(), "r");
        }
    }
    match kind {
        ExperimentKind::Drift | ExperimentKind::Dominance => require(horizon.is_some(), "horizon"),
        ExperimentKind::Martingale => require(horizon.is_some() || checkpoints.is_some(), "horizon or checkpoints"),
        ExperimentKind::Runtime if parameters == ParameterRule::Explicit => {
            require(lambda.is_some(), "lambda");
            require(mu.is_some(), "mu");
            require(budget.is_some(), "budget");
        }
        _ => {}
    }
    let drift_like = matches!(kind, ExperimentKind::Drift | ExperimentKind::Dominance | ExperimentKind::Martingale);
    if drift_like {
        match algorithm {
            Algorithm::Umda | Algorithm::Pbil => {
                require(lambda.is_some(), "lambda");
                require(mu.is_some(), "mu");
                if algorithm == Algorithm::Pbil {
                    require(rho.is_some(), "rho");
                }
            }
            Algorithm::Cga => require(k.is_some(), "k"),
        }
        if parameters != ParameterRule::Explicit {
            errors.push(format!("parameters: only \"explicit\" applies to {} specs", kind.as_str()));
        }
    } else if algorithm != Algorithm::Umda {
        errors.push(format!("algorithm: {} specs use umda", kind.as_str()));
    }
    if kind == ExperimentKind::Runtime && benchmark != BenchmarkKind::LeadingOnes {
        errors.push("benchmark: runtime specs use leading_ones".into());
    }
    if kind == ExperimentKind::Dominance && map.contains_key("benchmark") {
        errors.push("benchmark: dominance specs always compare neutral with first_zero_bonus".into());
    }

    if let (Some(l), Some(m)) = (lambda, mu) {
        if m > l {
            errors.push(format!("mu: μ ≤ λ violated (μ = {m}, λ = {l})"));
        }
    }
    if lambda == Some(0) {
        errors.push("lambda: λ ≥ 1 violated".into());
    }
    if mu == Some(0) {
        errors.push("mu: μ ≥ 1 violated".into());
    }
    if let Some(rho) = rho {
        if !(0.0..=1.0).contains(&rho) {
            errors.push(format!("rho: ρ ∈ [0, 1] violated (ρ = {rho})"));
        }
    }
    if let Some(k) = k {
        if !(k.is_finite() && k > 0.0) {
            errors.push(format!("k: K > 0 violated (K = {k})"));
        }
    }
    if let Some(r) = r {
        if !(2..=MAX_CARDINALITY).contains(&r) {
            errors.push(format!("r: 2 ≤ r ≤ {MAX_CARDINALITY} violated (r = {r})"));
        }
    }
    if let Some(n) = n {
        if n < 1 {
            errors.push("n: n ≥ 1 violated".into());
        }
        if margins && n < 2 {
            errors.push("n: n ≥ 2 violated (borders 1/((r−1)n) need n ≥ 2)".into());
        }
    }
    if !(s.is_finite() && s >= 1.0) {
        errors.push(format!("s: s ≥ 1 violated (s = {s})"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        errors.push(format!("delta: δ ∈ (0, 1) violated (δ = {delta})"));
    }
    if parameters == ParameterRule::Convergence {
        if let (Some(n), Some(r)) = (n, r) {
            if n < 4 * r {
                errors.push(format!("n: n ≥ 4r violated (n = {n}, r = {r})"));
            }
        }
    }
    if trials == 0 {
        errors.push("trials: trials ≥ 1 violated".into());
    }
    if workers == 0 {
        errors.push("workers: workers ≥ 1 violated".into());
    }
    if kind == ExperimentKind::Dominance && horizon == Some(0) {
        errors.push("horizon: t ≥ 1 violated".into());
    }
    if let (Some(n), Some(r)) = (n, r) {
        for w in &watched {
            if let Err(e) = w.check(n, r) {
                errors.push(format!("watched: {e}"));
            }
        }
    }
    let checkpoints = match (kind, checkpoints) {
        (ExperimentKind::Martingale, Some(c)) => {
            if c.is_empty() {
                errors.push("checkpoints: at least one iteration required".into());
            }
            c
        }
        (ExperimentKind::Martingale, None) => (1..=horizon.unwrap_or(0)).collect(),
        (_, Some(_)) => {
            errors.push(format!("checkpoints: not used by {} specs", kind.as_str()));
            Vec::new()
        }
        (_, None) => Vec::new(),
    };
    let a = &assertions;
    let misplaced: &[(&str, bool)] = &[
        ("exit_sigmas", a.exit_sigmas.is_some() && kind != ExperimentKind::Drift),
        ("max_deviation_se", a.max_deviation_se.is_some() && kind != ExperimentKind::Martingale),
        ("max_violations", a.max_violations.is_some() && kind != ExperimentKind::Dominance),
        ("min_converged", a.min_converged.is_some() && kind != ExperimentKind::Runtime),
        ("converged_within", a.converged_within.is_some() && kind != ExperimentKind::Runtime),
        ("max_early_hits", a.max_early_hits.is_some() && kind != ExperimentKind::Runtime),
        ("early_hit_through", a.early_hit_through.is_some() && kind != ExperimentKind::Runtime),
        ("monotone_critical", a.monotone_critical.is_some() && kind != ExperimentKind::Runtime),
        ("max_bound", a.max_bound.is_some() && kind != ExperimentKind::BoundEval),
    ];
    for (key, bad) in misplaced {
        if *bad {
            errors.push(format!("assert.{key}: not applicable to {} specs", kind.as_str()));
        }
    }
    if a.max_bound.is_some() && parameters != ParameterRule::Explicit {
        errors.push("assert.max_bound: needs explicit parameters".into());
    }

    if !errors.is_empty() {
        return Err(SpecErrors(errors));
    }
    Ok(ExperimentSpec {
        kind,
        seed: seed.unwrap_or(0),
        algorithm,
        lambda,
        mu,
        rho,
        k,
        benchmark: if kind == ExperimentKind::Dominance { BenchmarkKind::FirstZeroBonus } else { benchmark },
        n: n.unwrap_or(0),
        r: r.unwrap_or(0),
        margins,
        horizon,
        checkpoints,
        parameters,
        s,
        delta,
        budget,
        trials,
        watched,
        workers,
        out,
        assertions,
    })
}
