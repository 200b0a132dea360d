//! Configuration, pipeline, exporters and verification reports for the
//! `voss` command-line tool.

pub mod config;
pub mod error;
pub mod export;
pub mod pipeline;
pub mod references;
pub mod report;
pub mod symspec;

pub use config::{RunConfig, Settings};
pub use error::{CliError, CliResult};
pub use pipeline::{run_pipeline, Command};
pub use report::VerificationReport;
