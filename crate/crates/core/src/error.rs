use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An input failed validation (negative mass, wrong normalization, ragged rows, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The instance exceeds a hard size guard; the operation refuses to run.
    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A construction invariant failed; indicates a bug or a violated caller contract.
    #[error("internal invariant failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
