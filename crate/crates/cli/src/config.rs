use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, CliError};

pub const DEFAULT_OUTPUT: &str = "cxr-output";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    IhoResponse,
    Lyapunov,
    OtocCheck,
    QubitGeodesic,
    StateResponse,
    Sweep,
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::IhoResponse => "iho-response",
            Self::Lyapunov => "lyapunov",
            Self::OtocCheck => "otoc-check",
            Self::QubitGeodesic => "qubit-geodesic",
            Self::StateResponse => "state-response",
            Self::Sweep => "sweep",
        };
        f.write_str(name)
    }
}

impl FromStr for ExperimentName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        <Self as ValueEnum>::from_str(s, false).map_err(|_| invalid(format!("unknown experiment `{s}`")))
    }
}

/// Evenly spaced times `start, …, end` (`points` values).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self, CliError> {
        let grid = Self { start, end, points };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.start.is_finite() && self.end.is_finite()) || self.start < 0.0 || self.end <= self.start {
            return Err(invalid(format!("time grid needs end > start >= 0, got {}:{}", self.start, self.end)));
        }
        if self.points < 2 {
            return Err(invalid(format!("time grid needs at least 2 points, got {}", self.points)));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.end - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| if k + 1 == self.points { self.end } else { self.start + step * k as f64 })
            .collect()
    }
}

impl FromStr for TimeGrid {
    type Err = CliError;

    /// `start:end:points`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(invalid(format!("time grid `{s}` is not start:end:points")));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| invalid(format!("bad number `{x}` in time grid")));
        let points = n.trim().parse::<usize>().map_err(|_| invalid(format!("bad point count `{n}` in time grid")))?;
        Self::new(num(a)?, num(b)?, points)
    }
}

/// Full description of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
    #[serde(default)]
    pub time_grid: Option<TimeGrid>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Concurrency bound for sweeps; the ambient thread pool when absent.
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_output() -> PathBuf {
    PathBuf::from(DEFAULT_OUTPUT)
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentName) -> Self {
        Self {
            experiment,
            parameters: BTreeMap::new(),
            time_grid: None,
            output: default_output(),
            seed: 0,
            jobs: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| invalid(format!("config JSON: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(g) = &self.time_grid {
            g.validate()?;
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn grid_or(&self, default: TimeGrid) -> Vec<f64> {
        self.time_grid.unwrap_or(default).values()
    }

    pub fn f64_param(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.parameters.get(key) {
            None => Ok(default),
            Some(v) => value_as_f64(v).ok_or_else(|| invalid(format!("parameter `{key}` must be a number"))),
        }
    }

    pub fn str_param<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str, CliError> {
        match self.parameters.get(key) {
            None => Ok(default),
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(invalid(format!("parameter `{key}` must be a string"))),
        }
    }

    /// Number list given as a JSON array or a comma-separated string.
    pub fn vec_param(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let bad = || invalid(format!("parameter `{key}` must be a list of numbers"));
        match self.parameters.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items.iter().map(|v| value_as_f64(v).ok_or_else(bad)).collect(),
            Some(Value::String(s)) => s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect(),
            Some(_) => Err(bad()),
        }
    }

    /// Fit window given as `"a:b"` or `[a, b]`.
    pub fn window_param(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64), CliError> {
        let window = match self.parameters.get(key) {
            None => default,
            Some(Value::String(s)) => {
                let parts: Vec<&str> = s.split(':').collect();
                let [a, b] = parts.as_slice() else {
                    return Err(invalid(format!("window `{s}` is not start:end")));
                };
                let num = |x: &str| x.trim().parse::<f64>().map_err(|_| invalid(format!("bad number `{x}` in window")));
                (num(a)?, num(b)?)
            }
            Some(_) => {
                let v = self.vec_param(key, &[])?;
                let [a, b] = v.as_slice() else {
                    return Err(invalid(format!("window `{key}` needs two numbers")));
                };
                (*a, *b)
            }
        };
        if !(window.0.is_finite() && window.1.is_finite() && window.1 > window.0) {
            return Err(invalid(format!("window needs end > start, got {}:{}", window.0, window.1)));
        }
        Ok(window)
    }
}

fn value_as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Parses `key=value`; the value is read as JSON when possible, else as a string.
pub fn parse_param(s: &str) -> Result<(String, Value), CliError> {
    let (key, raw) = s.split_once('=').ok_or_else(|| invalid(format!("parameter `{s}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}
