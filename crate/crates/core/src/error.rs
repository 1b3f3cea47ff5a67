use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index} below tolerance {tolerance:e})")]
    NotPositiveDefinite { index: usize, pivot: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("factor (I - B) is singular; weights do not describe a valid DAG")]
    SingularFactor,

    #[error("weights contain a directed cycle")]
    Cyclic,

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("index {index} is invalid: {reason}")]
    IndexError { index: usize, reason: String },

    #[error("enumeration too large: {what} requires {required} items, cap is {cap}")]
    EnumerationTooLarge {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    #[error("exact solver cap exceeded: |S| = {size} > {cap}")]
    ExactCapExceeded { size: usize, cap: usize },

    #[error("dynamic program cap exceeded: p = {p} > {cap}")]
    DpCapExceeded { p: usize, cap: usize },

    #[error("problem too large for {what}: {size} > {cap}")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("negative input {0} to penalty")]
    NegativeInput(f64),

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
