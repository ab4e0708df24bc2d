use thiserror::Error;

/// Errors raised by model construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration value is outside its documented range.
    #[error("invalid `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// Two objects that must live on the same lattice do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Weights handed to a simplex constructor are too far from normalized.
    #[error("weights sum to {sum}, too far from 1 to renormalize")]
    NotNormalized { sum: f64 },

    /// A weight is negative or not finite.
    #[error("weight at site {site} is {value}")]
    InvalidWeight { site: i64, value: f64 },

    /// An operation that requires a strictly interior point got a boundary one.
    #[error("site {site} has zero mass; operation needs an interior point")]
    NotInterior { site: i64 },

    /// A fitness evaluation hit a zero denominator.
    #[error("fitness undefined at site {site}: {reason}")]
    Domain { site: i64, reason: String },

    /// Mean fitness vanished, so the resampling law is undefined.
    #[error("mean fitness is {mean}; resampling law undefined")]
    DegenerateState { mean: f64 },

    /// A Moran transition rate went negative (selection strength too large).
    #[error("negative rate {rate} for transition {from} -> {to}")]
    NegativeRate { from: i64, to: i64, rate: f64 },

    /// The kernels violate the structural hypotheses an analysis relies on.
    #[error("kernel hypothesis violated: {0}")]
    Hypothesis(String),

    /// A linear system arising from a face or Newton solve is singular.
    #[error("singular system: {0}")]
    Singular(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
