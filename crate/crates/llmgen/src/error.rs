use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("prompt template must contain exactly one {{item}} placeholder, found {0}")]
    Placeholder(usize),
    #[error("temperature {0} outside [0, 2]")]
    Temperature(f64),
    #[error("no temperatures configured")]
    NoTemperatures,
    #[error("concurrency must be at least 1")]
    ZeroConcurrency,
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("http client: {0}")]
    Client(String),
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

    /// True for failures caused by the remote service rather than local input.
    pub fn is_network(&self) -> bool {
        matches!(self, Error::Auth(_) | Error::Client(_))
    }
}
