use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vertex {vertex} out of range for p = {p}")]
    VertexOutOfRange { vertex: usize, p: usize },

    #[error("invalid vertex pair ({0}, {0}): endpoints must differ")]
    InvalidPair(usize),

    #[error("dimension mismatch: expected p = {expected}, found p = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("crossover probability q = {0} makes the channel degenerate (need 0 <= q < 0.5)")]
    DegenerateChannel(f64),

    #[error("edge ({0}, {1}) has |mu| = 1; its interaction is infinite")]
    DegenerateParameter(usize, usize),

    #[error("invalid vertex subset: {0}")]
    InvalidSubset(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("invalid bound inputs: {0}")]
    InvalidInputs(String),

    #[error("invalid sample batch: {0}")]
    InvalidBatch(String),

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
