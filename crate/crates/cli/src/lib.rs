//! Experiment harness around the `rootcma` library: configuration files,
//! the per-trial pipeline runner, and deterministic report/figure emission.

pub mod config;
pub mod emit;
pub mod pipeline;

use thiserror::Error;

pub use config::{load_config, ExperimentConfig, OutputFormat};
pub use emit::{emit_figure_data, write_report, write_sidecar, FigureKind};
pub use pipeline::{run_pipeline, Aggregate, RootRecord, RunReport, TrialRecord, Verb};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config validation error ({field}): {message}")]
    Validation { field: String, message: String },

    #[error("stage not run: {0}")]
    StageNotRun(String),

    #[error("encoding failure: {message}")]
    Encode { message: String },

    #[error(transparent)]
    Core(#[from] rootcma::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 config, 3 numeric/internal, 4 partial failures
    /// (the latter is assigned by the driver, not by an error value).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            _ => 3,
        }
    }
}
