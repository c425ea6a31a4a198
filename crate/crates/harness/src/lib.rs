//! Experiment harness for `spikelearn`: configuration, the experiment
//! families, and result emission.

use std::path::{Path, PathBuf};

pub mod bank;
pub mod common;
pub mod config;
pub mod experiments;
pub mod output;
pub mod tracker;

pub use bank::ClassifierBank;
pub use config::{ConfigOverrides, Experiment, ExperimentConfig};
pub use experiments::run_experiment;
pub use output::{emit_results, ExperimentOutput, Table};
pub use tracker::ConvergenceTracker;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] spikelearn::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("experiment failed: {0}")]
    Failed(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        use spikelearn::Error as E;
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Core(E::InvalidParameter { .. } | E::Dimension { .. } | E::InvalidPattern(_) | E::Parse { .. }) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
