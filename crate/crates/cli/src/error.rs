use std::path::Path;

use thiserror::Error;
use voss_core::VossError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Numeric {
        stage: &'static str,
        #[source]
        source: VossError,
    },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Attaches the pipeline stage to a numeric error. Configuration errors
/// raised inside the kernel stay configuration errors.
pub trait InStage<T> {
    fn in_stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> InStage<T> for voss_core::Result<T> {
    fn in_stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| match e {
            VossError::Config(m) => CliError::Config(format!("{stage}: {m}")),
            source => CliError::Numeric { stage, source },
        })
    }
}
