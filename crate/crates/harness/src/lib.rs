//! Declarative experiment runner for the `adanorm` library.
//!
//! A config file names a problem generator and a list of methods; the runner
//! executes every (method, repeat) cell in parallel and writes one trace CSV
//! per cell plus summary tables. Every cell draws from its own seed, derived
//! from the config seed and the cell index, so outputs do not depend on
//! scheduling.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod bundled;
pub mod config;
pub mod experiment;
pub mod output;

pub use config::ExperimentConfig;
pub use experiment::{
    build_instance, run_experiment, run_ruig, run_sweep, verify_bounds, BoundsOutcome, CellResult,
    Instance, SweepRow,
};
pub use output::emit_plot_data;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} cells failed; first: {first}")]
    Cells {
        failed: usize,
        total: usize,
        first: String,
    },
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for configuration and cell errors, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } => 2,
            _ => 1,
        }
    }
}

/// Loads `name_or_path` as a bundled config name or, failing that, a file.
pub fn resolve_config(name_or_path: &str) -> Result<ExperimentConfig, HarnessError> {
    match bundled::get(name_or_path) {
        Some(text) => ExperimentConfig::parse(text),
        None => {
            let p = Path::new(name_or_path);
            if !p.exists() {
                return Err(HarnessError::config(format!(
                    "`{name_or_path}` is neither a bundled config nor a file"
                )));
            }
            ExperimentConfig::load(p)
        }
    }
}
