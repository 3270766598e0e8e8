//! r-valued fitness functions.
//!
//! Fitness values are `f64` even though the built-in benchmarks are integer
//! valued, so user-supplied objectives fit the same interface. Positions in
//! this module are 1-based.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{EdaError, Result};

/// An objective `f: [0..r−1]^n → ℝ`, maximized by the algorithms.
pub trait Fitness: Sync {
    fn name(&self) -> &str;

    fn evaluate(&self, x: &[u8]) -> f64;

    /// Best attainable value, when known. Used to detect that the optimum
    /// has been sampled.
    fn optimum(&self) -> Option<f64> {
        None
    }

    /// Whether the value at `position` never influences the fitness.
    fn is_neutral_at(&self, _position: usize) -> bool {
        false
    }

    /// Whether substituting `value` at `position` never lowers the fitness.
    fn weakly_prefers(&self, _position: usize, _value: u8) -> bool {
        false
    }
}

/// Number of consecutive 0s starting from the leftmost position.
pub fn r_leading_ones(x: &[u8]) -> usize {
    x.iter().take_while(|&&v| v == 0).count()
}

/// Constant zero; every position is neutral.
pub fn neutral_constant(_x: &[u8]) -> f64 {
    0.0
}

/// 1 if the first position holds value 0, else 0.
pub fn first_zero_bonus(x: &[u8]) -> f64 {
    match x.first() {
        Some(0) => 1.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    LeadingOnes,
    Neutral,
    FirstZeroBonus,
}

impl BenchmarkKind {
    pub const NAMES: [&'static str; 3] = ["leading_ones", "neutral", "first_zero_bonus"];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LeadingOnes => "leading_ones",
            Self::Neutral => "neutral",
            Self::FirstZeroBonus => "first_zero_bonus",
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkKind {
    type Err = EdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leading_ones" | "r_leading_ones" => Ok(Self::LeadingOnes),
            "neutral" | "neutral_constant" => Ok(Self::Neutral),
            "first_zero_bonus" => Ok(Self::FirstZeroBonus),
            other => Err(EdaError::Parameter(format!(
                "unknown benchmark {other:?}, expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// A built-in benchmark bound to a dimension and cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Benchmark {
    pub kind: BenchmarkKind,
    pub n: usize,
    pub r: usize,
}

impl Benchmark {
    pub fn new(kind: BenchmarkKind, n: usize, r: usize) -> Self {
        Self { kind, n, r }
    }

    pub fn leading_ones(n: usize, r: usize) -> Self {
        Self::new(BenchmarkKind::LeadingOnes, n, r)
    }

    pub fn neutral(n: usize, r: usize) -> Self {
        Self::new(BenchmarkKind::Neutral, n, r)
    }

    pub fn first_zero_bonus(n: usize, r: usize) -> Self {
        Self::new(BenchmarkKind::FirstZeroBonus, n, r)
    }
}

impl Fitness for Benchmark {
    fn name(&self) -> &str {
        self.kind.as_str()
    }

    fn evaluate(&self, x: &[u8]) -> f64 {
        match self.kind {
            BenchmarkKind::LeadingOnes => r_leading_ones(x) as f64,
            BenchmarkKind::Neutral => neutral_constant(x),
            BenchmarkKind::FirstZeroBonus => first_zero_bonus(x),
        }
    }

    fn optimum(&self) -> Option<f64> {
        Some(match self.kind {
            BenchmarkKind::LeadingOnes => self.n as f64,
            BenchmarkKind::Neutral => 0.0,
            BenchmarkKind::FirstZeroBonus => 1.0,
        })
    }

    fn is_neutral_at(&self, position: usize) -> bool {
        match self.kind {
            BenchmarkKind::LeadingOnes => false,
            BenchmarkKind::Neutral => true,
            BenchmarkKind::FirstZeroBonus => position != 1,
        }
    }

    fn weakly_prefers(&self, position: usize, value: u8) -> bool {
        match self.kind {
            BenchmarkKind::LeadingOnes => value == 0,
            BenchmarkKind::Neutral => true,
            BenchmarkKind::FirstZeroBonus => position != 1 || value == 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_ones_values() {
        assert_eq!(r_leading_ones(&[0, 0, 0, 0]), 4);
        assert_eq!(r_leading_ones(&[1, 0, 0]), 0);
        assert_eq!(r_leading_ones(&[0, 0, 2, 1, 0]), 2);
        assert_eq!(Benchmark::leading_ones(4, 3).optimum(), Some(4.0));
    }

    #[test]
    fn first_zero_bonus_values() {
        assert_eq!(first_zero_bonus(&[0, 5, 3]), 1.0);
        assert_eq!(first_zero_bonus(&[2, 0, 0]), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for name in BenchmarkKind::NAMES {
            assert_eq!(name.parse::<BenchmarkKind>().unwrap().as_str(), name);
        }
        assert!("leadingones".parse::<BenchmarkKind>().is_err());
    }
}
