use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the fusion toolkit.
///
/// The three kinds map onto distinct caller responses: bad input data
/// (`Validation`), a mathematically undefined request such as cognitive
/// diversity over fewer than three labels (`Domain`), and filesystem
/// failures (`Io`).
#[derive(Debug, Error)]
pub enum CfaError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CfaError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CfaError::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        CfaError::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CfaError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CfaError> = std::result::Result<T, E>;
