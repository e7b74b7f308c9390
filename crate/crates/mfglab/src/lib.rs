//! Batch front end: configs in, field dumps, reports and curves out.

pub mod commands;
pub mod config;

pub use commands::{cmd_analyze, cmd_check_models, cmd_solve, CliError};
pub use config::{ConfigError, RunConfig};

/// Sizes the global worker pool from `MFGLAB_THREADS` when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MFGLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Run(format!("MFGLAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Run(format!("MFGLAB_THREADS: {e}")))
}
