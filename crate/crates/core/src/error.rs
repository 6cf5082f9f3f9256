use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}:{line}: {message}")]
    Format {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("context has no in-vocabulary tokens")]
    Unscorable,

    #[error("no scorable pairs in dataset ({total} pairs read)")]
    NoScorablePairs { total: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(origin: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            origin: origin.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for this error class.
    ///
    /// 1 usage/config, 2 I/O, 3 data format, 4 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownToken(_) => 1,
            Error::Io { .. } => 2,
            Error::Format { .. } | Error::Unscorable | Error::NoScorablePairs { .. } => 3,
            Error::Domain(_) | Error::Precondition(_) | Error::Invariant(_) => 4,
        }
    }
}
