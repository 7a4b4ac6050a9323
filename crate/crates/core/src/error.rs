use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),
    #[error("unknown variable: {0}")]
    UnknownVariable(String),
    #[error("duplicate variable id {0}")]
    DuplicateVariable(usize),
    #[error("problem has no constraint blocks")]
    EmptyProblem,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid plant data: {0}")]
    PlantFormat(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
