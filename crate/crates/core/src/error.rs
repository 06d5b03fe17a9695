use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid response for outcome `{outcome}`: {value}")]
    InvalidResponse { outcome: String, value: f64 },
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: usize },
    #[error("too few observations: {0}")]
    TooFewObservations(String),
    #[error("missing noise variance for continuous outcome `{0}`")]
    MissingSigma2(String),
    #[error("zero-variance surface for outcome index {0}")]
    ZeroVariance(usize),
    #[error("single-class labels")]
    SingleClass,
    #[error("value out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = core::result::Result<T, Error>;
