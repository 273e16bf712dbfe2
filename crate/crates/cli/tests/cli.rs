use std::path::Path;
use std::process::{Command, Output};

use cxresponse_cli::{run_experiment, CliError, ExperimentConfig, ExperimentName, ExperimentReport, REPORT_FILE};
use serde_json::json;

fn cxr(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxr"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env_remove("CXR_OUTPUT")
        .output()
        .expect("cxr runs")
}

fn report(dir: &Path) -> ExperimentReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join(REPORT_FILE)).unwrap()).unwrap()
}

#[test]
fn iho_response_csv_row_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = cxr(&["iho-response", "--omega", "1", "--t-grid", "0:5:11"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("iho_response.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let t_col = header.iter().position(|h| h == "t").unwrap();
    let rows: Vec<Vec<f64>> =
        reader.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    let row = rows.iter().find(|r| r[t_col] == 1.0).unwrap();
    let numeric: Vec<f64> = ["R_xx", "R_xp", "R_px", "R_pp"]
        .iter()
        .map(|name| row[header.iter().position(|h| h == name).unwrap_or_else(|| panic!("column {name} in {header:?}"))])
        .collect();
    let (ch, sh) = (1f64.cosh(), 1f64.sinh());
    for (v, e) in numeric.iter().zip([ch, sh, sh, ch]) {
        assert!((v - e).abs() / e < 1e-6);
    }
    let raw = std::fs::read_to_string(dir.path().join("iho_response.csv")).unwrap();
    let sample = raw.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    let mantissa = sample.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.replace('.', "").len(), 15, "value `{sample}` should carry 15 significant digits");
    assert!(report(dir.path()).passed);
}

#[test]
fn otoc_and_harmonic_lyapunov_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cxr(&["otoc-check", "--omega", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert!(r.check("correspondence_residual").unwrap().value <= 1e-10);

    let dir = tempfile::tempdir().unwrap();
    let out = cxr(&["lyapunov", "--system", "harmonic", "--omega", "1", "--window", "20:50"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn invalid_configuration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["iho-response", "--t-grid", "5:0:3"],
        vec!["iho-response", "--t-grid", "0:1:1"],
        vec!["lyapunov", "--system", "nonsense"],
        vec!["lyapunov", "--window", "9"],
        vec!["iho-response", "--jobs", "0"],
    ] {
        let out = cxr(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_cxr")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_failure_exits_one_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = cxr(&["lyapunov", "--system", "iho", "--omega", "3", "--window", "40:80"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let r = report(dir.path());
    assert!(!r.passed);
    assert!(r.error.is_some() || r.failed_checks().next().is_some());
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_json_str(&format!(
        r#"{{"experiment": "otoc-check", "parameters": {{"omega": 0.7}}, "seed": 4, "output": {}}}"#,
        serde_json::to_string(dir.path()).unwrap()
    ))
    .unwrap();
    run_experiment(&cfg).unwrap();
    let first = std::fs::read(dir.path().join(REPORT_FILE)).unwrap();
    let csv_first = std::fs::read(dir.path().join("otoc.csv")).unwrap();
    run_experiment(&cfg).unwrap();
    assert_eq!(first, std::fs::read(dir.path().join(REPORT_FILE)).unwrap());
    assert_eq!(csv_first, std::fs::read(dir.path().join("otoc.csv")).unwrap());
}

#[test]
fn config_file_and_env_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    let out_dir = dir.path().join("from-env");
    std::fs::write(
        &config,
        json!({"experiment": "iho-response", "parameters": {"omega": 2.0}, "time_grid": {"start": 0.0, "end": 1.0, "points": 3}})
            .to_string(),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cxr"))
        .arg("--config")
        .arg(&config)
        .env("CXR_OUTPUT", &out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out_dir);
    assert_eq!(r.config.experiment, ExperimentName::IhoResponse);
    assert_eq!(r.config.parameters["omega"], json!(2.0));

    std::fs::write(&config, r#"{"experiment": "iho-response", "unknown": 1}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cxr")).arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_directory_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::new(ExperimentName::Sweep)
        .with_param("base", "iho-response")
        .with_param("parameter", "omega")
        .with_param("values", json!([0.5, 1.0, 2.0]));
    let cfg = ExperimentConfig { output: dir.path().to_path_buf(), jobs: Some(2), ..cfg };
    let r = run_experiment(&cfg).unwrap();
    assert!(r.passed, "{:?}", r.failed_checks().collect::<Vec<_>>());
    for i in 0..3 {
        let point = dir.path().join(format!("point_{i:03}"));
        assert!(point.join(REPORT_FILE).exists());
        assert!(point.join("iho_response.csv").exists());
    }
    assert!(r.checks.iter().any(|c| c.name.starts_with("point_002/")));
    let summary = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);

    let nested = ExperimentConfig { output: dir.path().join("bad"), ..cfg.clone() }.with_param("base", "sweep");
    assert!(matches!(run_experiment(&nested), Err(CliError::InvalidConfig(_))));
}
