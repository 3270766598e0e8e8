use thiserror::Error;

/// Errors raised by the model, the algorithms and the experiment labs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdaError {
    #[error("cardinality r must be in [2, {max}], got {r}")]
    Cardinality { r: usize, max: usize },

    #[error("dimension n must be at least {min}, got {n}")]
    Dimension { n: usize, min: usize },

    #[error("invalid borders: {0}")]
    Borders(String),

    #[error("row {row} is not a distribution: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("individual has length {len}, expected {n}")]
    IndividualLength { len: usize, n: usize },

    #[error("individual value {value} at position {position} is not below r = {r}")]
    IndividualValue { position: usize, value: u8, r: usize },

    #[error("mismatched experiment configurations: {0}")]
    Mismatch(String),
}

pub type Result<T, E = EdaError> = std::result::Result<T, E>;
