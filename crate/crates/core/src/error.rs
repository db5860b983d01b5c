use std::path::PathBuf;

use thiserror::Error;

use crate::logit_data::Label;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset contains no records")]
    EmptyDataset,

    #[error("dataset contains no labeled records")]
    NoLabels,

    #[error("class '{0}' has no samples")]
    EmptyClass(Label),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("optimization diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),
}

/// Coarse failure classes, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Configuration,
    Data,
    Degenerate,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorKind::Configuration,
            Error::Io { .. } | Error::Parse { .. } | Error::EmptyDataset => ErrorKind::Data,
            Error::NoLabels
            | Error::EmptyClass(_)
            | Error::Degenerate(_)
            | Error::Divergence { .. } => ErrorKind::Degenerate,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
