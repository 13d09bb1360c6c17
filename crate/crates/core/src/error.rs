use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),

    #[error("ill-conditioned interconnect (condition number {cond:.3e})")]
    IllConditionedInterconnect { cond: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid port index {port} for a {count}-port network")]
    InvalidPort { port: usize, count: usize },

    #[error("unphysical switch model: {0}")]
    UnphysicalSwitch(String),

    #[error("far-field patterns are defined on different angular grids")]
    GridMismatch,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("resonant model (condition number {cond:.3e})")]
    ResonantModel { cond: f64 },

    #[error("degenerate excitation: {0}")]
    DegenerateExcitation(String),

    #[error("active or inconsistent model: {0}")]
    ActiveModel(String),

    #[error("passivity violation in radiating structure (excess {excess:.3e})")]
    NonPassiveStructure { excess: f64 },

    #[error("missing switch configuration for {0}")]
    MissingConfig(String),

    #[error("search space of {size} states exceeds the cap of {cap}")]
    CapExceeded { size: f64, cap: u64 },

    #[error("invalid switch configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
