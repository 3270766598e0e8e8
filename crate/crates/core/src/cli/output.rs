//! Table rows written by the CLI and helpers to encode and decode them.
//!
//! Column orders are fixed (schema version [`SCHEMA_VERSION`]):
//!
//! - drift: `position,value,trials,exits,p_hat,ci_lo,ci_hi,bound`
//! - runtime: `trial,seed,converged_iter,first_hit_iter,evaluations,flagged`
//! - martingale: `position,value,iteration,mean,std_err,deviation_se`
//! - dominance: `theta,cdf_weak,cdf_neutral,pooled_se,violation`
//!
//! Missing values (no bound, never converged) are empty fields. Floats are
//! written in shortest round-trip form, so rows re-parse to equal values.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::drift::{DominanceReport, ExitStats, MartingaleReport};
use crate::runtime::RuntimeRecord;

pub const SCHEMA_VERSION: u32 = 1;

/// A CSV record type with a fixed column order.
pub trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRow for DriftRow {
    const HEADER: &'static [&'static str] = &["position", "value", "trials", "exits", "p_hat", "ci_lo", "ci_hi", "bound"];
}

impl CsvRow for RuntimeRow {
    const HEADER: &'static [&'static str] =
        &["trial", "seed", "converged_iter", "first_hit_iter", "evaluations", "flagged"];
}

impl CsvRow for MartingaleCsvRow {
    const HEADER: &'static [&'static str] = &["position", "value", "iteration", "mean", "std_err", "deviation_se"];
}

impl CsvRow for DominanceRow {
    const HEADER: &'static [&'static str] = &["theta", "cdf_weak", "cdf_neutral", "pooled_se", "violation"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub position: usize,
    pub value: u8,
    pub trials: u64,
    pub exits: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub trial: usize,
    pub seed: u64,
    pub converged_iter: Option<u64>,
    pub first_hit_iter: Option<u64>,
    pub evaluations: u64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCsvRow {
    pub position: usize,
    pub value: u8,
    pub iteration: u64,
    pub mean: f64,
    pub std_err: f64,
    pub deviation_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub theta: f64,
    pub cdf_weak: f64,
    pub cdf_neutral: f64,
    pub pooled_se: f64,
    pub violation: bool,
}

pub fn drift_rows(stats: &ExitStats) -> Vec<DriftRow> {
    stats
        .pairs
        .iter()
        .map(|p| DriftRow {
            position: p.position,
            value: p.value,
            trials: p.trials,
            exits: p.exits,
            p_hat: p.p_hat,
            ci_lo: p.ci_lo,
            ci_hi: p.ci_hi,
            bound: p.bound,
        })
        .collect()
}

pub fn runtime_rows(records: &[RuntimeRecord]) -> Vec<RuntimeRow> {
    records
        .iter()
        .map(|r| RuntimeRow {
            trial: r.trial,
            seed: r.seed,
            converged_iter: r.converged_iter,
            first_hit_iter: r.first_hit_iter,
            evaluations: r.evaluations,
            flagged: r.flagged,
        })
        .collect()
}

pub fn martingale_rows(reports: &[MartingaleReport]) -> Vec<MartingaleCsvRow> {
    reports
        .iter()
        .flat_map(|rep| {
            rep.rows.iter().map(|row| MartingaleCsvRow {
                position: rep.position,
                value: rep.value,
                iteration: row.iteration,
                mean: row.mean,
                std_err: row.std_err,
                deviation_se: row.deviation_se,
            })
        })
        .collect()
}

pub fn dominance_rows(report: &DominanceReport) -> Vec<DominanceRow> {
    report
        .points
        .iter()
        .map(|p| DominanceRow {
            theta: p.theta,
            cdf_weak: p.cdf_weak,
            cdf_neutral: p.cdf_neutral,
            pooled_se: p.pooled_se,
            violation: p.violation,
        })
        .collect()
}

/// Encodes rows as CSV with a header line. An empty slice still gets the header.
pub fn csv_bytes<T: CsvRow>(rows: &[T]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(T::HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Decodes CSV written by [`csv_bytes`].
pub fn read_csv<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(bytes).deserialize().collect()
}
