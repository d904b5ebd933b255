//! Batch experiments over the `cantor-sio` library: each command reads a [`LabConfig`], runs one
//! experiment and produces an [`ExperimentReport`] whose verdicts decide the exit code.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

pub use commands::{run_command, Command};
pub use config::{LabConfig, Resolved};
pub use report::{Cell, ExperimentReport, Status, Table, Verdict};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    /// The configured kernel does not meet the command's precondition.
    #[error("refused: {0}")]
    Refused(String),
    #[error(transparent)]
    Compute(#[from] cantor_sio::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Refused(_) => 2,
            LabError::Compute(_) | LabError::Io(_) => 1,
        }
    }
}

/// Loads the configuration, applies the seed override and runs `command`; the report is written
/// under `out` when given.
pub fn run(
    command: Command,
    config: &std::path::Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<(ExperimentReport, Vec<PathBuf>), LabError> {
    let mut cfg = LabConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = run_command(command, cfg)?;
    let written = match out {
        Some(dir) => report.write(&dir)?,
        None => Vec::new(),
    };
    Ok((report, written))
}
