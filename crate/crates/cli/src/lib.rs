//! Batch pipeline behind the `qoekit` binary.

pub mod config;
mod ingest;
mod io;
mod plot;
mod predict;
mod synth;
mod train;

use std::path::PathBuf;

use thiserror::Error;

pub use config::PipelineConfig;
pub use ingest::{cmd_ingest, IngestOutcome, IngestStatus};
pub use io::{sha256_hex, write_atomic};
pub use plot::cmd_plot_data;
pub use predict::{cmd_predict, Kpis};
pub use synth::{cmd_synthesize, SynthOutcome, MEDIA_LADDER};
pub use train::{cmd_train, MetricsReport, TrainOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: no such file", .0.display())]
    MissingFile(PathBuf),
    #[error(transparent)]
    Failed(#[from] anyhow::Error),
}

impl CliError {
    /// 0 success, 1 failure, 2 usage or configuration error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::MissingFile(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

pub(crate) fn require_file(path: &std::path::Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingFile(path.to_path_buf()))
    }
}
