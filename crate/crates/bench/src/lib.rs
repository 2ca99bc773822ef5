//! Experiment driver for the `entropic-core` learners.
//!
//! A run expands an [`ExperimentConfig`] into independent cells (loss kind ×
//! α × seed for the learning experiments), executes them, and writes one
//! record CSV per cell plus a merged record file and a summary table.

use std::path::{Path, PathBuf};

pub mod checks;
pub mod config;
pub mod experiments;
pub mod records;
pub mod summary;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{run_experiment, RunReport};
pub use records::Row;

/// Environment variable that replaces the configured output directory.
pub const OUT_DIR_ENV: &str = "ENTROPIC_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("cell {cell} diverged: {source}")]
    Diverged { cell: String, source: entropic_core::Error },

    #[error(transparent)]
    Core(#[from] entropic_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Other(String),
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status: 2 for bad input, 3 for fail-fast divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Parse { .. } => 2,
            BenchError::Diverged { .. } => 3,
            _ => 1,
        }
    }
}

/// The configured output directory, unless the environment overrides it.
pub fn output_dir(configured: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => configured.to_path_buf(),
    }
}
