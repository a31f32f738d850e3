use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A location or array fell outside the grid it was used with.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    /// Malformed raster input. `line` is 1-based and counts the header.
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("config error in `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("run with seed {seed} failed: {source}")]
    Run {
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than by a failing run.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config { .. } | Error::Param(_) | Error::Format { .. } => true,
            Error::Run { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
