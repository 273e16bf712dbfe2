use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// Passes when `value <= tolerance`.
    AtMost,
    /// Passes when `value > tolerance`.
    Exceeds,
}

/// One built-in invariant check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub relation: Relation,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub results: BTreeMap<String, Value>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    pub error: Option<String>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const CSV_DIGITS: usize = 14;

/// Accumulates checks, results and output files of a running experiment.
pub(crate) struct Run {
    dir: PathBuf,
    pub checks: Vec<Check>,
    pub results: BTreeMap<String, Value>,
    pub files: Vec<String>,
}

impl Run {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), checks: Vec::new(), results: BTreeMap::new(), files: Vec::new() }
    }

    pub fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        let passed = value.is_finite() && value <= tolerance;
        self.checks.push(Check { name: name.into(), passed, value, relation: Relation::AtMost, tolerance });
    }

    pub fn exceeds(&mut self, name: &str, value: f64, threshold: f64) {
        let passed = value.is_finite() && value > threshold;
        self.checks.push(Check { name: name.into(), passed, value, relation: Relation::Exceeds, tolerance: threshold });
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) -> Result<(), CliError> {
        self.results.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Numeric table with a header row; values use 15 significant digits.
    pub fn csv(&mut self, file: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(file))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:.CSV_DIGITS$e}")))?;
        }
        w.flush()?;
        self.files.push(file.into());
        Ok(())
    }

    pub fn csv_text(&mut self, file: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(file))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(file.into());
        Ok(())
    }

    pub fn json(&mut self, file: &str, value: &impl Serialize) -> Result<(), CliError> {
        std::fs::write(self.dir.join(file), serde_json::to_string_pretty(value)?)?;
        self.files.push(file.into());
        Ok(())
    }

    pub fn finish(mut self, config: ExperimentConfig, error: Option<String>) -> ExperimentReport {
        self.files.sort();
        let passed = error.is_none() && self.checks.iter().all(|c| c.passed);
        ExperimentReport { config, checks: self.checks, results: self.results, files: self.files, error, passed }
    }
}
