use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Data(String),

    #[error("no complete series: all {0} columns have missing entries")]
    NoCompleteSeries(usize),

    #[error("non-positive level {value} for variable {label} at {date} under log returns")]
    NonPositiveLevel {
        label: String,
        date: String,
        value: f64,
    },

    #[error("window exceeds series length: window {window}, series length {length}")]
    WindowTooLong { window: usize, length: usize },

    #[error("zero variance for variable {label} in window starting at row {start}")]
    ZeroVariance { label: String, start: usize },

    #[error("eigendecomposition did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("KMO not estimable: {0}")]
    NotEstimable(String),

    #[error("every window of the sweep is singular")]
    AllSingular,

    #[error("no candidate window reaches KMO threshold {threshold}")]
    NoAdequateWindow { threshold: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 1 config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Data(_)
            | Error::NoCompleteSeries(_)
            | Error::NonPositiveLevel { .. }
            | Error::WindowTooLong { .. }
            | Error::ZeroVariance { .. }
            | Error::InvalidArgument(_) => 2,
            Error::NoConvergence { .. }
            | Error::NotEstimable(_)
            | Error::AllSingular
            | Error::NoAdequateWindow { .. } => 3,
        }
    }
}
