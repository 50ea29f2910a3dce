use thiserror::Error;

/// Errors produced by the selection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on shapes, budgets or configuration values was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The numerics left their valid domain: a singular system, a matrix that
    /// is not positive semidefinite, or a non-finite objective.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::NumericDomain(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
