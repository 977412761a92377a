use std::path::PathBuf;

use thiserror::Error;

use crate::iterlinalg::SolverReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed {format} input: {msg}")]
    Format { format: &'static str, msg: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("degenerate block: every eigenvalue was clipped")]
    DegenerateBlock,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("numerical failure: {msg}")]
    Numerical {
        msg: String,
        report: Option<SolverReport>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical {
            msg: msg.into(),
            report: None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            format,
            msg: msg.into(),
        }
    }
}
