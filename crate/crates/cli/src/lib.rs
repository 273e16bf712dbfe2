//! Experiment runner for the `cxresponse` library.
//!
//! Each experiment reads an [`ExperimentConfig`], writes CSV series and a
//! JSON report (`report.json`) into the output directory, and records the
//! outcome of its built-in invariant checks.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

pub use config::{parse_param, ExperimentConfig, ExperimentName, TimeGrid};
pub use error::CliError;
pub use report::{Check, ExperimentReport, Relation};

use error::invalid;
use report::Run;

pub const REPORT_FILE: &str = "report.json";

/// Runs the configured experiment and writes its outputs and report.
///
/// Configuration problems are returned as [`CliError::InvalidConfig`];
/// pipeline failures produce a report with `error` set and `passed = false`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output)?;
    let mut run = Run::new(&cfg.output);
    let outcome = match cfg.experiment {
        ExperimentName::IhoResponse => experiments::iho_response(cfg, &mut run),
        ExperimentName::Lyapunov => experiments::lyapunov(cfg, &mut run),
        ExperimentName::OtocCheck => experiments::otoc_check(cfg, &mut run),
        ExperimentName::QubitGeodesic => experiments::qubit_geodesic(cfg, &mut run),
        ExperimentName::StateResponse => experiments::state_response(cfg, &mut run),
        ExperimentName::Sweep => sweep(cfg, &mut run),
    };
    let error = match outcome {
        Ok(()) => None,
        Err(e @ CliError::InvalidConfig(_)) => return Err(e),
        Err(e) => Some(e.to_string()),
    };
    let report = run.finish(cfg.clone(), error);
    write_report(&report, &cfg.output)?;
    Ok(report)
}

fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(), CliError> {
    std::fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

/// Runs `base` once per entry of `values`, substituting `parameter`.
///
/// Points run concurrently up to `jobs`; each writes into `point_NNN/` and
/// the summary is folded in sweep order.
fn sweep(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), CliError> {
    let base: ExperimentName = cfg.str_param("base", "")?.parse()?;
    if base == ExperimentName::Sweep {
        return Err(invalid("a sweep cannot sweep sweeps"));
    }
    let parameter = cfg.str_param("parameter", "")?.to_string();
    if parameter.is_empty() {
        return Err(invalid("sweep needs a `parameter` name"));
    }
    let values = match cfg.parameters.get("values") {
        Some(Value::Array(v)) if !v.is_empty() => v.clone(),
        _ => return Err(invalid("sweep needs a non-empty `values` array")),
    };
    let points: Vec<ExperimentConfig> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut point = cfg.clone();
            point.experiment = base;
            for key in ["base", "parameter", "values"] {
                point.parameters.remove(key);
            }
            point.parameters.insert(parameter.clone(), v.clone());
            point.output = cfg.output.join(format!("point_{i:03}"));
            point.jobs = None;
            point
        })
        .collect();

    let jobs = cfg.jobs.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid(format!("cannot build a pool of {jobs} threads: {e}")))?;
    let reports: Vec<Result<ExperimentReport, CliError>> = pool.install(|| points.par_iter().map(run_experiment).collect());

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, (value, report)) in values.iter().zip(reports).enumerate() {
        let report = report?;
        for check in &report.checks {
            let mut c = check.clone();
            c.name = format!("point_{i:03}/{}", check.name);
            run.checks.push(c);
        }
        if let Some(err) = &report.error {
            run.at_most(&format!("point_{i:03}/completed"), 1.0, 0.0);
            summary.push(serde_json::json!({ "index": i, "value": value, "passed": false, "error": err }));
        } else {
            summary.push(serde_json::json!({ "index": i, "value": value, "passed": report.passed }));
        }
        for file in &report.files {
            run.files.push(format!("point_{i:03}/{file}"));
        }
        run.files.push(format!("point_{i:03}/{REPORT_FILE}"));
        rows.push(vec![i.to_string(), value.to_string(), report.passed.to_string()]);
    }
    run.csv_text("sweep.csv", &["index", "value", "passed"], &rows)?;
    run.result("points", summary)?;
    run.result("base", base)?;
    run.result("parameter", parameter)?;
    Ok(())
}
