//! Training, evaluation, checkpoints, structure dumps and the CLI.

mod checkpoint;
pub mod cli;
mod config;
mod dump;
mod metrics;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::RunConfig;
pub use dump::{induce_structure, BlockDump, NodeLabel, StructureDump};
pub use metrics::{
    above_threshold, evaluate, fact_key, pick_threshold, Counts, FactKey, MetricsReport, TrainFacts, Triple,
};
pub use train::{evaluate_model, score_corpus, train, EpochRecord, TrainOutcome};

use thiserror::Error;

use crate::docmodel::DataError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    EmptyInput(&'static str),
    #[error("{0}")]
    Usage(String),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 1 for usage problems, 2 for everything caused by
    /// inputs (files, configs, corpora, checkpoints).
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            _ => 2,
        }
    }
}
