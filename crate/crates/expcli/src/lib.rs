//! Experiment harness: configuration, multi-run training campaigns,
//! summary statistics and objective sweeps.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{EnvKind, ExperimentConfig, Method};
pub use experiment::{run_experiment, summarize_dir, RunRecord, SummaryStats};
pub use metrics::{auc, ci95, smooth, Statistic};
pub use sweep::emit_sweep;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error(transparent)]
    Reg(#[from] hrelm::regcore::RegError),
    #[error("{0}")]
    Runtime(String),
}

impl ExpError {
    /// Process exit code: 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExpError::Config(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExpError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = ExpError> = std::result::Result<T, E>;
