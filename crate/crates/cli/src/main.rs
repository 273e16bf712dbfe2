use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use cxresponse_cli::{parse_param, run_experiment, CliError, ExperimentConfig, ExperimentName, TimeGrid};

/// Complexity-response experiments.
#[derive(Debug, Parser)]
#[command(name = "cxr", version)]
struct Args {
    /// Experiment to run (overrides the config file).
    #[arg(value_enum)]
    experiment: Option<ExperimentName>,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "CXR_OUTPUT")]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrency bound for sweep points and per-time work.
    #[arg(long)]
    jobs: Option<usize>,
    /// Time grid `start:end:points`.
    #[arg(long = "t-grid")]
    t_grid: Option<String>,
    #[arg(long)]
    omega: Option<f64>,
    /// Fit window `start:end`.
    #[arg(long)]
    window: Option<String>,
    /// System name: iho, harmonic, free, quartic, polynomial or qubit.
    #[arg(long)]
    system: Option<String>,
    /// Cost weights as a comma-separated list.
    #[arg(long)]
    weights: Option<String>,
    /// Extra experiment parameter `key=value` (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

fn build_config(args: Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&args.config, args.experiment) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(name)) => ExperimentConfig::new(name),
        (None, None) => return Err(CliError::InvalidConfig("give an experiment name or --config".into())),
    };
    if let Some(name) = args.experiment {
        cfg.experiment = name;
    }
    if let Some(out) = args.output {
        cfg.output = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = Some(jobs);
    }
    if let Some(g) = &args.t_grid {
        cfg.time_grid = Some(g.parse::<TimeGrid>()?);
    }
    let flags = [
        ("omega", args.omega.map(Value::from)),
        ("window", args.window.map(Value::from)),
        ("system", args.system.map(Value::from)),
        ("weights", args.weights.map(Value::from)),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.parameters.insert(key.into(), v);
        }
    }
    for p in &args.params {
        let (k, v) = parse_param(p)?;
        cfg.parameters.insert(k, v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match build_config(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(jobs) = cfg.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("warning: thread pool already initialised: {e}");
        }
    }
    match run_experiment(&cfg) {
        Ok(report) => {
            for check in &report.checks {
                let status = if check.passed { "PASS" } else { "FAIL" };
                println!("{status} {} value={:e} tolerance={:e}", check.name, check.value, check.tolerance);
            }
            if let Some(err) = &report.error {
                eprintln!("error: {err}");
            }
            println!("report: {}", cfg.output.join(cxresponse_cli::REPORT_FILE).display());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
