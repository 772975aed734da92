//! Command-line front end: configuration, run orchestration, sweeps and
//! the output bundle.

// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod oracles;
pub mod output;
pub mod run;
pub mod sweep;

pub use config::{ResolvedRun, RunConfig, SweepConfig};
pub use error::CliError;
pub use run::{execute_run, simulate, RunResult, Summary};
pub use sweep::{execute_sweep, run_sweep};

use std::path::{Path, PathBuf};

/// Environment variable overriding the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "OUTPUT_DIR";

/// Output directory: the command-line flag, then `OUTPUT_DIR`, then the
/// config file.
pub fn output_dir(flag: Option<&Path>, configured: &Path) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => configured.to_path_buf(),
    }
}
