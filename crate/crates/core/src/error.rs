use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A caller broke an API contract (e.g. a deformation field that moves a fixed boundary).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("linear solve failed: {reason} ({diagnostics})")]
    Solver { reason: String, diagnostics: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }

    pub(crate) fn mesh(msg: impl Into<String>) -> Self {
        Error::InvalidMesh(msg.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
