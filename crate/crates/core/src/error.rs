use std::path::PathBuf;

use thiserror::Error;

use crate::topology::UserId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A resource request cannot be satisfied within the available pool.
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("user {0} has no usable link on its assigned delivery path")]
    UnservableUser(UserId),

    #[error("configuration failed validation: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("chart error on {path}: {message}")]
    Chart { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
