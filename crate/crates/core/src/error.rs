use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, ill-typed or violates an invariant.
    /// `key` is the dotted path of the offending entry, e.g. `gas.eta`.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An internal identity that must hold exactly was violated.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("realization {realization} of sweep point {sweep_index} failed: {message}")]
    Realization {
        sweep_index: usize,
        realization: u64,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn dimension(expected: usize, found: usize) -> Self {
        Error::Dimension { expected, found }
    }
}
