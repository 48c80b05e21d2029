use thiserror::Error;

/// Errors raised by tensor construction, coordinate conversion and reduction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("tensor order {0} exceeds the supported maximum of {max}", max = crate::tensor::MAX_ORDER)]
    OrderTooLarge(usize),

    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("index {index} out of range 1..={extent} on mode {mode}")]
    IndexOutOfRange {
        mode: usize,
        index: usize,
        extent: usize,
    },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("data length {actual} does not match shape (expected {expected})")]
    DataLength { expected: usize, actual: usize },

    #[error("element at flat offset {offset} is {value}, strictly positive input required")]
    NonPositive { offset: usize, value: f64 },

    #[error("element at flat offset {offset} is {value}, non-negative input required")]
    Negative { offset: usize, value: f64 },

    #[error("non-finite value at flat offset {offset}")]
    NonFinite { offset: usize },

    #[error("tensor sums to {0}, expected 1 (normalized input required)")]
    NotNormalized(f64),

    #[error("tensor has zero total mass")]
    ZeroSum,

    #[error("invalid Tucker rank: {0}")]
    InvalidRank(String),

    #[error("invalid bingo index sets: {0}")]
    InvalidSpec(String),

    #[error("invalid eta coordinates: {0}")]
    InvalidEta(String),

    #[error("generalized KL divergence is infinite: q is zero at flat offset {offset} where p = {p}")]
    InfiniteDivergence { offset: usize, p: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration diverged to non-finite values after {0} iterations")]
    Diverged(usize),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
