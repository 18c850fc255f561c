use std::fmt;

/// Error categories with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// Unreadable or unsuitable input data (exit 2).
    Data(anyhow::Error),
    /// Remote service or credentials (exit 3).
    Network(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Network(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Data(e) | Failure::Network(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<entrate_core::Error> for Failure {
    fn from(e: entrate_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<entrate_llmgen::Error> for Failure {
    fn from(e: entrate_llmgen::Error) -> Self {
        use entrate_llmgen::Error as E;
        match e {
            E::Placeholder(_) | E::Temperature(_) | E::NoTemperatures | E::ZeroConcurrency => {
                Failure::Usage(e.to_string())
            }
            e if e.is_network() => Failure::Network(e.into()),
            e => Failure::Data(e.into()),
        }
    }
}

/// Wraps an I/O error on an output path as a data failure.
pub fn write_error(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Data(anyhow::anyhow!("{}: {e}", path.display()))
}
