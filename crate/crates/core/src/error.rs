//! Error type shared by all engine modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was called on data in the wrong state (e.g. mirroring an
    /// estimate that is not flagged as mirrored).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Geometry too degenerate to define the result (coincident joints,
    /// collinear point sets).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A numerical procedure produced non-finite values or failed to make
    /// sense of its inputs mid-flight.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A configuration value combination that cannot be run.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A metric has no defined value on the given data (e.g. all segments
    /// shorter than the finite-difference window).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A file failed to parse against its schema.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    /// A file declared a version this build does not understand.
    #[error("unsupported file version: {0}")]
    Version(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
