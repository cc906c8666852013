use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown parameter key `{0}`")]
    UnknownParam(String),
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("point ({x:.3}, {y:.3}) is outside the costmap")]
    OutOfBounds { x: f64, y: f64 },
    #[error("no path between start and goal")]
    NoPath,
    #[error("modulator timed out: {0}")]
    Timeout(String),
    #[error("modulator transport failure: {0}")]
    Transport(String),
    #[error("log rejected: {0}")]
    Log(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { context: context.into(), message: message.to_string() }
    }
}
