use thiserror::Error;

#[derive(Debug, Error)]
pub enum MfgError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("infeasible dual state: {0}")]
    InfeasibleDual(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },

    #[error("all points excluded: {0}")]
    AllPointsExcluded(String),

    #[error("malformed field file: {0}")]
    MalformedField(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MfgError>;

pub(crate) fn invalid(msg: impl Into<String>) -> MfgError {
    MfgError::InvalidParameter(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> MfgError {
    MfgError::ShapeMismatch(msg.into())
}
