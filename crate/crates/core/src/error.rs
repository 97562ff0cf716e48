//! Error type shared by every module.

use thiserror::Error;

/// Failures reported by the library.
///
/// The CLI maps `Capability` to exit code 2 and everything else to 1.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition of a construction does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A sum hit a term whose denominator is numerically zero.
    #[error("singular term at q = {q:?}")]
    Singular { q: Vec<i64> },
    /// Request is well posed but exceeds a dimension or work budget.
    #[error("capability exceeded: {0}")]
    Capability(String),
    /// Malformed configuration or command line input.
    #[error("config error: {0}")]
    Config(String),
    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(String),
    /// An internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capability(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
