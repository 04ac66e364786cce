use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("view mismatch: expected {expected:?}, got {got:?}")]
    ViewMismatch {
        expected: crate::mdp::ViewId,
        got: crate::mdp::ViewId,
    },

    #[error("trajectory is not complete: {0}")]
    IncompleteTrajectory(String),

    #[error("trajectory mapping failed: {0}")]
    MappingFailed(String),

    #[error("reward preservation violated: {0}")]
    AssumptionViolated(String),

    #[error("malformed LP: {0}")]
    MalformedProblem(String),

    #[error("simplex pivot limit ({0}) exceeded")]
    PivotLimit(usize),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
