//! Crate-wide error type with process exit-code classification.

use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the pipeline and its stages.
///
/// Every variant maps onto one of three exit-code classes:
/// configuration problems (1), data problems (2), and violated internal
/// invariants (3).
#[derive(Debug, Error)]
pub enum Error {
    /// Flags, columns or parameter values that cannot be acted on.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input file that cannot be read or parsed at all.
    #[error("data error in {path}: {message}")]
    Data { path: PathBuf, message: String },

    /// An intermediate file whose header does not match the expected schema.
    #[error("schema mismatch in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    /// A violated internal invariant; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub fn schema(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Process exit code for this error class: 1 configuration, 2 data,
    /// 3 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data { .. } | Error::Schema { .. } => 2,
            Error::Internal(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
