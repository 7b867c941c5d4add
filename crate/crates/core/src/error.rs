use std::path::PathBuf;

use thiserror::Error;

use crate::ekf::EkfError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error for every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node sampling exhausted after {attempts} attempts ({found} of {requested} free points found)")]
    SamplingExhausted {
        attempts: usize,
        found: usize,
        requested: usize,
    },

    #[error("roadmap is disconnected and no collision-free bridging edge exists ({components} components)")]
    Disconnected { components: usize },

    #[error("graph is not Eulerian: {0}")]
    NotEulerian(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("no candidate circuit satisfies the flight-time limit of {rho_s} s")]
    NoFeasibleCircuit { rho_s: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown path selection `{0}`")]
    UnknownSelection(String),

    #[error(transparent)]
    Ekf(#[from] EkfError),

    #[error("missing or unreadable artifact {}: {message}", path.display())]
    MissingArtifact { path: PathBuf, message: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI. Documented in the README.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownSelection(_) => 2,
            Error::Parse { what, .. } if what.starts_with("config") => 2,
            Error::Parse { .. } | Error::InvalidMap(_) => 3,
            Error::InvalidGraph(_)
            | Error::SamplingExhausted { .. }
            | Error::Disconnected { .. }
            | Error::NotEulerian(_)
            | Error::InvalidCircuit(_)
            | Error::NoFeasibleCircuit { .. }
            | Error::EmptyInput(_) => 4,
            Error::Ekf(_) => 5,
            Error::MissingArtifact { .. } => 6,
            Error::Io { .. } => 7,
        }
    }
}
