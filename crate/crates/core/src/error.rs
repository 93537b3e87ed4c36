use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("nonpositive response time at row {row}")]
    NonpositiveRt { row: usize },

    #[error("{field} = {value} out of range 1..={max} at row {row}")]
    CategoryOutOfRange {
        row: usize,
        field: &'static str,
        value: i64,
        max: usize,
    },

    #[error("no trials for subject {subject} under stimulus {stimulus}")]
    MissingPair { subject: usize, stimulus: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user data or configuration rather than numerics or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::NonpositiveRt { .. }
                | Error::CategoryOutOfRange { .. }
                | Error::MissingPair { .. }
                | Error::EmptyDataset
                | Error::Config(_)
                | Error::InvalidArgument(_)
        )
    }
}
