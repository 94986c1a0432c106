use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Variants are grouped by the module that raises them. Data-shape problems
/// carry enough context (indices, values) to locate the offending input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // momentindex
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("multi-index has degree {actual}, expected {expected}")]
    DegreeMismatch { expected: u32, actual: u32 },
    #[error("integer overflow computing {what}")]
    Overflow { what: &'static str },

    // model
    #[error("point set is empty")]
    Empty,
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("mixture weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("weight {index} is {value}, expected > 0")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("covariance {index} is not symmetric")]
    AsymmetricCovariance { index: usize },
    #[error("covariance {index} is not positive definite")]
    NonPDCovariance { index: usize },
    #[error("standard deviation {index} is {value}, expected finite and > 0")]
    NonPositiveStddev { index: usize, value: f64 },
    #[error("mixture has no components")]
    NoComponents,

    // shared shape checks
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("direction has norm {norm}, expected 1")]
    NonUnitDirection { norm: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // moments
    #[error("moment degree {degree} exceeds the cap of {cap}")]
    DegreeCapExceeded { degree: u32, cap: u32 },
    #[error("need at least {needed} moments, got {available}")]
    InsufficientMoments { needed: usize, available: usize },
    #[error("even moment m_{order} is {value}, expected > 0")]
    NonPositiveEvenMoment { order: usize, value: f64 },
    #[error("moment sequence invalid: {0}")]
    InvalidMomentSequence(String),

    // gmm1d
    #[error("need at least {needed} samples, got {available}")]
    TooFewSamples { needed: usize, available: usize },

    // reconstruct
    #[error("design matrix is rank deficient (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e})")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),

    // descriptor / bench
    #[error("GeM pooling requires nonnegative inputs, found {value}")]
    GemDomain { value: f64 },
    #[error("slice {slice}: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("feature width {found} does not match model width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("{method}: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<Error>,
    },

    // serialization
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
