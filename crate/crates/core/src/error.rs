use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a numeric routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structurally malformed instance or solution document.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A well-formed document whose content violates an invariant.
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// A fractional vector violates the constraint system.
    #[error("infeasible: row {row} violated by {violation:.3e}")]
    Infeasible { row: usize, violation: f64 },

    #[error("generation error: {0}")]
    Generation(String),

    /// An exhaustive computation needs more work than its budget allows.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parameter search failed: {0}")]
    ParameterSearch(String),

    /// A numerical fault: an outcome the algorithm guarantees did not occur.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
