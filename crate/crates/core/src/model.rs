//! The n×r frequency matrix and its border restriction.
//!
//! Row `i` of the matrix is the sampling distribution of position `i`: value
//! `j` is drawn with probability `p[i][j]`, independently across positions.
//! After every update each row is mapped back onto the clamped simplex
//! `{p : a ≤ p_j ≤ b, Σ p_j = 1}` with `b = 1 − a(r − 1)`. The restriction
//! clamps entrywise and then rescales every entry's share above `a` so that
//! the row sums to one again.
//!
//! Row indices on [`FrequencyMatrix`] are 0-based. Everything that talks
//! about *positions* (watched pairs, critical positions, config files) is
//! 1-based.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EdaError, Result};

/// Largest supported number of values per position (values are stored as `u8`).
pub const MAX_CARDINALITY: usize = 256;

/// Tolerance on row sums accepted as input to the restriction.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Tolerance on row sums produced by the restriction.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Tolerance used when testing whether a frequency sits at a border.
pub const BORDER_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    WithMargins,
    WithoutMargins,
}

/// Lower and upper clamp values for a row of `r` frequencies.
///
/// Always satisfies `0 ≤ a`, `a·r < 1` and `b = 1 − a(r − 1)`, hence
/// `a < 1/r < b`. The mode is `WithoutMargins` exactly when `a = 0, b = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Borders {
    lower: f64,
    upper: f64,
    r: usize,
    mode: MarginMode,
}

fn check_cardinality(r: usize) -> Result<()> {
    if !(2..=MAX_CARDINALITY).contains(&r) {
        return Err(EdaError::Cardinality { r, max: MAX_CARDINALITY });
    }
    Ok(())
}

impl Borders {
    /// Borders with lower value `lower`; the upper value is `1 − lower·(r − 1)`.
    pub fn new(lower: f64, r: usize) -> Result<Self> {
        check_cardinality(r)?;
        Self::checked(lower, 1.0 - lower * (r - 1) as f64, r)
    }

    /// The unrestricted model: `a = 0`, `b = 1`.
    pub fn without_margins(r: usize) -> Result<Self> {
        check_cardinality(r)?;
        Ok(Self { lower: 0.0, upper: 1.0, r, mode: MarginMode::WithoutMargins })
    }

    /// The default borders `a = 1/((r − 1)n)`, `b = 1 − 1/n`.
    ///
    /// For `r = 2` this is the usual binary margin `[1/n, 1 − 1/n]`.
    pub fn default_for(n: usize, r: usize) -> Result<Self> {
        check_cardinality(r)?;
        if n < 2 {
            return Err(EdaError::Dimension { n, min: 2 });
        }
        let lower = 1.0 / ((r - 1) as f64 * n as f64);
        Self::checked(lower, 1.0 - 1.0 / n as f64, r)
    }

    fn checked(lower: f64, upper: f64, r: usize) -> Result<Self> {
        if !lower.is_finite() || lower < 0.0 {
            return Err(EdaError::Borders(format!("lower border {lower} must be finite and non-negative")));
        }
        if lower * r as f64 >= 1.0 {
            return Err(EdaError::Borders(format!(
                "lower border {lower} violates a·r < 1 for r = {r} (a·r = {})",
                lower * r as f64
            )));
        }
        let mode = if lower == 0.0 { MarginMode::WithoutMargins } else { MarginMode::WithMargins };
        let upper = if mode == MarginMode::WithoutMargins { 1.0 } else { upper };
        Ok(Self { lower, upper, r, mode })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn cardinality(&self) -> usize {
        self.r
    }

    pub fn mode(&self) -> MarginMode {
        self.mode
    }

    /// Probability mass that has to sit above the lower border: `1 − a·r`.
    pub fn free_mass(&self) -> f64 {
        1.0 - self.lower * self.r as f64
    }

    pub fn is_at_upper(&self, p: f64) -> bool {
        (p - self.upper).abs() <= BORDER_TOLERANCE
    }
}

/// See [`Borders::default_for`].
pub fn default_borders(n: usize, r: usize) -> Result<Borders> {
    Borders::default_for(n, r)
}

/// A row of `r` frequencies after an update but before the restriction.
#[derive(Debug, Clone, PartialEq)]
pub struct RowUpdate(Vec<f64>);

impl RowUpdate {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RowUpdate {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Restricts an updated row to `[a, b]` while keeping its sum at one.
pub fn restrict_row(update: &RowUpdate, borders: &Borders) -> Result<Vec<f64>> {
    let mut row = update.0.clone();
    restrict_in_place(&mut row, borders, 0)?;
    Ok(row)
}

/// In-place restriction; `row_index` is only used for error reporting.
///
/// Rows that are already inside the borders and sum to one within
/// [`SUM_TOLERANCE`] are returned unchanged, which is what the rescaling
/// yields in exact arithmetic (its scale factor is then exactly one).
pub(crate) fn restrict_in_place(row: &mut [f64], borders: &Borders, row_index: usize) -> Result<()> {
    let invalid = |reason: String| EdaError::InvalidRow { row: row_index, reason };
    if row.len() != borders.r {
        return Err(invalid(format!("length {} but r = {}", row.len(), borders.r)));
    }
    if let Some(p) = row.iter().find(|p| !p.is_finite()) {
        return Err(invalid(format!("non-finite entry {p}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(invalid(format!("sums to {sum}, expected 1 within {ROW_TOLERANCE:e}")));
    }

    let (a, b) = (borders.lower, borders.upper);
    let inside = row.iter().all(|&p| a <= p && p <= b);
    if inside && (sum - 1.0).abs() <= SUM_TOLERANCE {
        return Ok(());
    }

    let mut excess = 0.0;
    for p in row.iter_mut() {
        *p = p.clamp(a, b);
        excess += *p - a;
    }
    // sum > a·r implies at least one entry lies strictly above a after clamping
    if excess <= 0.0 {
        return Err(invalid(format!("no mass above the lower border {a} after clamping")));
    }
    let scale = borders.free_mass() / excess;
    for p in row.iter_mut() {
        *p = ((*p - a) * scale + a).clamp(a, b);
    }

    let residual = 1.0 - row.iter().sum::<f64>();
    if residual.abs() > SUM_TOLERANCE {
        if residual.abs() > ROW_TOLERANCE {
            return Err(invalid(format!("restricted row misses unit sum by {residual:e}")));
        }
        let slot = row
            .iter()
            .enumerate()
            .filter(|(_, &p)| (a..=b).contains(&(p + residual)))
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(k, _)| k)
            .ok_or_else(|| invalid(format!("cannot absorb residual {residual:e} within borders")))?;
        row[slot] += residual;
    }
    Ok(())
}

/// A candidate solution in `[0..r−1]^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Individual(Vec<u8>);

impl Individual {
    pub fn new(values: Vec<u8>, r: usize) -> Result<Self> {
        check_cardinality(r)?;
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, &v)| v as usize >= r) {
            return Err(EdaError::IndividualValue { position: position + 1, value, r });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

impl AsRef<[u8]> for Individual {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// The probabilistic model of an r-valued univariate EDA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMatrix {
    n: usize,
    r: usize,
    borders: Borders,
    /// Row-major, `n * r` entries.
    rows: Vec<f64>,
}

impl FrequencyMatrix {
    /// The uniform model: every frequency is `1/r`.
    pub fn new_uniform(n: usize, r: usize, borders: Borders) -> Result<Self> {
        check_cardinality(r)?;
        if n == 0 {
            return Err(EdaError::Dimension { n, min: 1 });
        }
        if borders.r != r {
            return Err(EdaError::Borders(format!("borders built for r = {} used with r = {r}", borders.r)));
        }
        Ok(Self { n, r, borders, rows: vec![1.0 / r as f64; n * r] })
    }

    /// Builds a matrix from explicit rows, validating sums and borders.
    pub fn from_rows(rows: Vec<Vec<f64>>, borders: Borders) -> Result<Self> {
        let r = borders.r;
        let n = rows.len();
        if n == 0 {
            return Err(EdaError::Dimension { n, min: 1 });
        }
        let mut flat = Vec::with_capacity(n * r);
        for (i, row) in rows.iter().enumerate() {
            let invalid = |reason: String| EdaError::InvalidRow { row: i, reason };
            if row.len() != r {
                return Err(invalid(format!("length {} but r = {r}", row.len())));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(invalid(format!("sums to {sum}")));
            }
            let (a, b) = (borders.lower, borders.upper);
            if let Some(p) = row.iter().find(|&&p| !(a - BORDER_TOLERANCE..=b + BORDER_TOLERANCE).contains(&p)) {
                return Err(invalid(format!("entry {p} outside [{a}, {b}]")));
            }
            flat.extend_from_slice(row);
        }
        Ok(Self { n, r, borders, rows: flat })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn cardinality(&self) -> usize {
        self.r
    }

    pub fn borders(&self) -> &Borders {
        &self.borders
    }

    /// Frequency of value `j` at 0-based row `i`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.r + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.r..(i + 1) * self.r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.r)
    }

    #[cfg(test)]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.rows[i * self.r..(i + 1) * self.r]
    }

    pub(crate) fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.rows
    }

    /// True when every value-0 frequency sits at the upper border.
    pub fn value0_converged(&self) -> bool {
        self.rows().all(|row| self.borders.is_at_upper(row[0]))
    }

    /// The 1-based critical position: the smallest position whose value-0
    /// frequency is below `b` while all earlier ones are at `b`, or `n + 1`
    /// once every value-0 frequency is at `b`.
    pub fn critical_position(&self) -> usize {
        self.rows()
            .position(|row| !self.borders.is_at_upper(row[0]))
            .map_or(self.n + 1, |i| i + 1)
    }

    /// Draws one individual; consumes exactly one `f64` per position.
    pub fn sample_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> Individual {
        let table = SamplingTable::new(self);
        let mut values = vec![0u8; self.n];
        table.fill(rng, &mut values);
        Individual(values)
    }
}

/// Per-row cumulative thresholds for inverse-CDF sampling.
///
/// Value `j` is chosen for a uniform `u ∈ [0, 1)` when exactly `j` of the
/// first `r − 1` cumulative sums are `≤ u`. Thresholds at and after the last
/// value with positive mass are set to infinity so zero-mass tails are
/// never drawn through rounding.
pub(crate) struct SamplingTable {
    n: usize,
    width: usize,
    thresholds: Vec<f64>,
}

impl SamplingTable {
    pub(crate) fn new(model: &FrequencyMatrix) -> Self {
        let width = model.r - 1;
        let mut thresholds = Vec::with_capacity(model.n * width);
        for row in model.rows() {
            let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            let mut acc = 0.0;
            for (j, &p) in row[..width].iter().enumerate() {
                acc += p;
                thresholds.push(if j >= last { f64::INFINITY } else { acc });
            }
        }
        Self { n: model.n, width, thresholds }
    }

    #[inline]
    pub(crate) fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u8]) {
        debug_assert_eq!(out.len(), self.n);
        for (slot, cuts) in out.iter_mut().zip(self.thresholds.chunks_exact(self.width)) {
            let u: f64 = rng.gen();
            *slot = cuts.iter().map(|&c| (u >= c) as u8).sum();
        }
    }
}
