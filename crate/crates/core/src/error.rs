//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by distribution construction, fitting, data handling, and
/// the study pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution parameter is outside its domain (e.g. μ ≤ 0, π ∉ [0,1]).
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// A probability argument was outside (0, 1).
    #[error("probability {0} outside (0, 1)")]
    ProbabilityDomain(f64),

    /// A datum lies outside the support of the law it is evaluated under.
    #[error("datum at index {index} (value {value}) is outside the support")]
    OutOfSupport { index: usize, value: f64 },

    /// Mismatched dimensions between designs, responses, or parameter vectors.
    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    /// A design matrix is rank deficient or otherwise unusable.
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    /// Input data failed validation (trajectories, CSV contents, configs).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// The optimizer exhausted its restarts without meeting the convergence
    /// criteria. The message carries the best achieved state.
    #[error("optimization did not converge: {0}")]
    NonConvergence(String),

    /// A numerical operation produced a non-finite or otherwise unusable
    /// result (singular systems, failed decompositions, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}
