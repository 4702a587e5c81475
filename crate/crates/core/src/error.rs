use std::path::PathBuf;

use crate::power_flow::ViolationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema violation in {}: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error("topology: {0}")]
    Topology(String),

    #[error("catalog: {0}")]
    Catalog(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// A reinforcement run that could not reach a violation-free grid.
    #[error("unplannable scenario: {reason}")]
    Unplannable {
        reason: String,
        residual: Option<Box<ViolationReport>>,
    },

    #[error("power flow diverged: {0}")]
    Divergence(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category used as the CLI error prefix.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Schema { .. } => "schema",
            Error::Topology(_) => "topology",
            Error::Catalog(_) => "catalog",
            Error::Invalid(_) => "invalid",
            Error::Unplannable { .. } => "unplannable",
            Error::Divergence(_) => "divergence",
            Error::Infeasible(_) => "infeasible",
            Error::Contract(_) => "contract",
            Error::Json(_) => "json",
        }
    }
}
