//! Configuration, checkpoints and the `geonode` subcommands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv;

use std::fmt;

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Run or check failed (exit 1).
    Failed(String),
    /// Invalid config, bad arguments or unreadable checkpoint (exit 2).
    Input(String),
    /// Resume checkpoint does not belong to this run (exit 3).
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Mismatch(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Failed(m) | CliError::Input(m) | CliError::Mismatch(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<geonode::Error> for CliError {
    fn from(e: geonode::Error) -> Self {
        match e {
            geonode::Error::Config(_) => CliError::Input(e.to_string()),
            geonode::Error::ResumeMismatch(_) => CliError::Mismatch(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

/// Applies GEONODE_THREADS to the global worker pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GEONODE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Input(format!("GEONODE_THREADS must be a positive integer (got {raw:?})")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Failed(e.to_string()))
}
