use std::path::PathBuf;

use crate::model::FeasibilityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("policy is infeasible: {0}")]
    Infeasible(FeasibilityReport),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("oracle state space of {estimated} exceeds the cap of {cap}; {hint}")]
    StateExplosion {
        estimated: u64,
        cap: u64,
        hint: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
