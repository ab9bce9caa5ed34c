use thiserror::Error;

use crate::belief::ValidationReport;

/// Errors raised by the scheduling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid belief vector: {0}")]
    InvalidBelief(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("malformed instance: {0}")]
    InvalidInstance(ValidationReport),

    #[error("observation {obs} has likelihood {likelihood:e}; branch should have been skipped")]
    ImpossibleObservation { obs: usize, likelihood: f64 },

    #[error("filter output mass {mass} drifted outside [1-1e-9, 1+1e-9]")]
    MassDrift { mass: f64 },

    #[error("beliefs of projects {0} and {1} are not MLR-comparable")]
    IncomparablePair(usize, usize),

    #[error("transition matrix has a complex eigenvalue {re} + {im}i")]
    ComplexSpectrum { re: f64, im: f64 },

    #[error("transition matrix is not diagonalizable within tolerance (residual {residual:e})")]
    NonDiagonalizable { residual: f64 },

    #[error("spectrum violates stochastic-matrix invariants: {0}")]
    InvalidSpectrum(String),

    #[error("node budget {budget} exceeded (N={n_projects}, Y={n_obs}, horizon={horizon})")]
    NodeBudgetExceeded {
        budget: usize,
        n_projects: usize,
        n_obs: usize,
        horizon: usize,
    },

    #[error("order precondition violated: {0}")]
    OrderPrecondition(String),

    #[error("instance generation exhausted after {attempts} attempts (last failing clause: {last_failing_clause})")]
    GenerationExhausted {
        attempts: usize,
        last_failing_clause: String,
    },

    #[error("cannot violate clause {clause}: {reason}")]
    CannotViolate { clause: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
