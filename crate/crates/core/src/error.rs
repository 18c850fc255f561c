use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("stream has {len} tokens, fewer than n_max = {n_max}")]
    StreamTooShort { len: usize, n_max: usize },
    #[error("n_max must be at least 1")]
    ZeroOrder,
    #[error("tables disagree on vocabulary or order: {0}")]
    VocabMismatch(String),
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error("order {n} outside 1..={n_max}")]
    OrderOutOfRange { n: usize, n_max: usize },
    #[error("need at least 3 points with distinct x, got {0}")]
    TooFewPoints(usize),
    #[error("corpus root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("no files matched under {0}")]
    NoFilesMatched(PathBuf),
    #[error("invalid glob pattern {pattern:?}: {reason}")]
    BadGlob { pattern: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
