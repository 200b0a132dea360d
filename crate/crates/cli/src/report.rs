//! The JSON verification report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use voss_core::frames::Frame;
use voss_core::sequences::{DependencyReport, HaltReason};
use voss_core::voss::Certificate;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceSummary {
    pub seed: String,
    pub direction: i32,
    pub members: Vec<String>,
    pub nets: usize,
    pub certificates: Vec<Certificate>,
    pub halt: HaltReason,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub command: String,
    pub config: RunConfig,
    pub provenance: Provenance,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dependency: Option<DependencyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSummary>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        VerificationReport {
            command: command.to_string(),
            provenance: Provenance { config_hash: config.hash(), version: env!("CARGO_PKG_VERSION").to_string() },
            config: config.clone(),
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            frame: None,
            dependency: None,
            sequence: None,
            passed: true,
        }
    }

    /// Records `value ≤ tolerance`; NaN fails.
    pub fn check(&mut self, name: impl Into<String>, value: f64, tolerance: f64) -> bool {
        let pass = value <= tolerance;
        self.checks.push(Check { name: name.into(), value, tolerance, pass });
        self.passed &= pass;
        pass
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn artifact(&mut self, name: impl Into<String>) {
        self.artifacts.push(name.into());
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}
