//! Command-line driver: config ingestion, solver orchestration and export.

pub mod commands;
pub mod config;
pub mod export;
pub mod expr;

use viflow_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Solver(_) | CliError::Io(_) => 2,
        }
    }
}

/// Input problems map to config errors, numerical ones to solver failures.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Config(m),
            Error::Io { .. }
            | Error::MeshParse { .. }
            | Error::InvalidMesh(_)
            | Error::NonManifoldBoundary { .. }
            | Error::IncompatibleFrames { .. }
            | Error::IncompatibleFlux { .. }
            | Error::InvalidPatch(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

/// Exit code for a completed run.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 3;
