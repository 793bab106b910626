use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimMismatch { expected: String, found: String },

    #[error("matrix is not Hermitian (max |A - A^dag| = {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("power series did not terminate within {steps} steps; operator is not nilpotent")]
    NotNilpotent { steps: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("invalid dimension {what} = {value}: {reason}")]
    InvalidDim {
        what: &'static str,
        value: usize,
        reason: String,
    },

    #[error("index {index} out of range for dimension {dim}")]
    OutOfRange { index: usize, dim: usize },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("function `{name}` takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },

    #[error("coupling evaluates to a non-finite value at z = {z}")]
    Domain { z: f64 },

    #[error("invalid parameter `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}
