//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any spincool module.
#[derive(Debug, Error)]
pub enum Error {
    /// A spin name was not found in the bound system.
    #[error("unknown spin `{0}`")]
    UnknownSpin(String),

    /// A value fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An argument violated a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A system, sequence or pulse configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Sequence text failed to parse; positions are 1-based.
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            col,
            msg: msg.into(),
        }
    }
}
