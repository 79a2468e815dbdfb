//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by state constructors, group operations and reductions.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition (size mismatch,
    /// out-of-range index, malformed word, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix fails the structural requirements of a state (trace,
    /// shape, finiteness).
    #[error("malformed state: {0}")]
    MalformedState(String),

    /// Rejection sampling exhausted its retry budget without producing a
    /// point in general position.
    #[error("degenerate sample: resampling budget exhausted")]
    DegenerateSample,

    /// A genericity condition required by a normal-form reduction does not
    /// hold at the input.
    #[error("not generic: {0}")]
    NotGeneric(String),

    /// The candidate normal form does not reproduce the input; the state is
    /// not in general position or not an X-state.
    #[error("reduction-failed: residual {residual:.3e} exceeds tolerance")]
    ReductionFailed { residual: f64 },

    /// Two matrices do not share invariant values, so no group element can
    /// map one onto the other.
    #[error("not-same-orbit: invariants disagree")]
    NotSameOrbit,

    /// A determinant (or other localized quantity) is too close to zero for
    /// the requested operation.
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// A denominator of a rational invariant formula vanishes at the input.
    #[error("localization-violated: denominator magnitude {0:.3e}")]
    LocalizationViolated(f64),

    /// A map handed to the finite-difference driver produced a non-finite
    /// value.
    #[error("evaluation error: {0}")]
    EvaluationError(String),

    /// An internal cross-check failed; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),

    /// I/O failure in the command-line layer.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure in the command-line layer.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
