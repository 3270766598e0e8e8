//! Univariate estimation-of-distribution algorithms for decision variables
//! that take `r ≥ 2` values, and Monte-Carlo laboratories for their genetic
//! drift and their runtime on r-LeadingOnes.
//!
//! * [`model`]: the n×r frequency matrix, borders and the restriction.
//! * [`edas`]: r-UMDA, r-PBIL and r-cGA steps and the run loop.
//! * [`benchmarks`]: r-LeadingOnes, a neutral function and a minimal
//!   weak-preference function.
//! * [`drift`]: concentration bound and drift experiments.
//! * [`runtime`]: parameter formulas and runtime experiments.
//! * [`cli`]: JSON experiment specs, dispatch and CSV/JSON output.

pub mod benchmarks;
pub mod cli;
pub mod drift;
pub mod edas;
pub mod error;
pub mod model;
pub mod runtime;
pub mod stats;
pub mod trials;

pub use benchmarks::{Benchmark, BenchmarkKind, Fitness};
pub use edas::{EdaParams, EdaState, ObservationPlan, StopTarget, StoppingRule, TrialRecord, Watch};
pub use error::{EdaError, Result};
pub use model::{default_borders, restrict_row, Borders, FrequencyMatrix, Individual, MarginMode, RowUpdate};
