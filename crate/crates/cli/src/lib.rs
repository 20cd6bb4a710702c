//! Command-line front end for `sheaflens`: problem files, reports and exit
//! codes.
//!
//! | exit code | meaning |
//! |-----------|---------|
//! | 0 | success |
//! | 1 | numerical failure (e.g. the extension solver did not converge) |
//! | 2 | unreadable input or schema error |
//! | 3 | partial assignment without `--extend` |
//! | 4 | a size cap was exceeded |
//! | 5 | the two problems live on different spaces |

pub mod commands;
pub mod output;
pub mod schema;

use std::path::Path;

use serde_json::json;
use thiserror::Error;

pub use commands::{
    cmd_filtration, cmd_interleave, cmd_pointcloud, cmd_radius, load_cloud, FiltrationReport, InterleaveReport,
    PointCloudReport, RadiusReport, Settings,
};
pub use output::NumFormat;
pub use schema::{ProblemFile, VERSION};

/// Environment variable limiting the worker threads.
pub const THREADS_ENV: &str = "SHEAFLENS_THREADS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("assignment has no value on {open}; pass --extend to fill it in")]
    Partial { open: String },
    #[error("{0}")]
    Cap(String),
    #[error("the problems live on different spaces")]
    SpaceMismatch,
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Schema(_) | CliError::Io { .. } => 2,
            CliError::Partial { .. } => 3,
            CliError::Cap(_) => 4,
            CliError::SpaceMismatch => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "schema",
            CliError::Io { .. } => "io",
            CliError::Partial { .. } => "partial_assignment",
            CliError::Cap(_) => "cap_exceeded",
            CliError::SpaceMismatch => "space_mismatch",
            CliError::Failure(_) => "failure",
        }
    }

    /// The JSON diagnostic printed on stderr.
    pub fn diagnostic(&self) -> serde_json::Value {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Sizes the global thread pool from `SHEAFLENS_THREADS` when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Schema(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    // a pool that is already built keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
