use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("multi-index {index:?} exceeds grid caps {caps:?}")]
    DegreeOverflow { index: Vec<usize>, caps: Vec<usize> },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("numeric error: {0}")]
    NumericError(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    PrereqFailed(String),
    #[error("structure violation: {0}")]
    StructureViolation(String),
    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
