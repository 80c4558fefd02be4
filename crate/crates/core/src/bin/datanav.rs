use clap::{Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use datanav::harness::{self, emit_plots, load_scenario, write_metrics, ComparisonReport, SchemeId};
use datanav::learning::fit_error_curve;
use datanav::par::ExecMode;
use datanav::surrogate::{validate_surrogate, SurrogateExpansion, ValidationReport};
use datanav::{Error, Result};

#[derive(Parser)]
#[command(name = "datanav", version, about = "Communication- and learning-aware trajectory planning")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scheme on a scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "CLD")]
        scheme: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate several schemes and write a comparison report with plots.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated list, e.g. CLD,RDA,RDA_COMMU.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a scenario and validate the surrogate along its reference path.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Number of expansion points along the reference path.
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
    /// Fit `err = a n^-b` to a CSV of `samples,error` rows.
    Fit {
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Serialize)]
struct ValidateOutput {
    scenario: String,
    passed: bool,
    reports: Vec<ValidationReport>,
}

fn exec(cli: &Cli) -> ExecMode {
    if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(())
}

fn read_fit_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    })?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.len() < 2 {
            return Err(Error::Parse(format!("line {}: expected two columns", i + 1)));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(n), Ok(e)) => points.push((n, e)),
            // A header row is allowed on the first line only.
            _ if i == 0 => continue,
            _ => return Err(Error::Parse(format!("line {}: expected numbers", i + 1))),
        }
    }
    Ok(points)
}

fn execute(cli: &Cli) -> Result<bool> {
    let mode = exec(cli);
    match &cli.command {
        Command::Run { scenario, scheme, seed, out } => {
            let sc = load_scenario(scenario)?;
            let scheme: SchemeId = scheme.parse()?;
            let metrics = harness::run_with(&sc, scheme, *seed, mode)?;
            if let Some(dir) = out {
                write_metrics(std::slice::from_ref(&metrics), dir)?;
                let report = ComparisonReport { scenario: sc.name.clone(), runs: vec![metrics.clone()] };
                emit_plots(&report, &sc, dir)?;
            }
            println!(
                "{} on {}: reached_goal={} steps={} total_bits={:.6e} mean_error={:.6} min_clearance={:.4}",
                metrics.scheme,
                sc.name,
                metrics.reached_goal,
                metrics.steps_used,
                metrics.total_bits,
                metrics.mean_model_error,
                metrics.min_obstacle_distance
            );
            Ok(true)
        }
        Command::Compare { scenario, schemes, seed, out } => {
            let sc = load_scenario(scenario)?;
            let ids = schemes.iter().map(|s| s.parse()).collect::<Result<Vec<SchemeId>>>()?;
            let report = harness::compare(&sc, &ids, *seed, mode)?;
            write_metrics(&report.runs, out)?;
            emit_plots(&report, &sc, out)?;
            for r in &report.runs {
                println!(
                    "{:<10} reached_goal={:<5} steps={:<4} total_bits={:.6e} mean_error={:.6}",
                    r.scheme.name(),
                    r.reached_goal,
                    r.steps_used,
                    r.total_bits,
                    r.mean_model_error
                );
            }
            Ok(true)
        }
        Command::Validate { scenario, samples, points } => {
            let sc = load_scenario(scenario)?;
            let len = sc.reference.length();
            let n = (*points).max(1);
            let mut reports = Vec::new();
            for i in 0..n {
                let s = if n == 1 { 0.0 } else { len * i as f64 / (n - 1) as f64 };
                let state = sc.reference.pose_at(s);
                let exp = SurrogateExpansion::new(state, &sc.sensors, &sc.channel);
                for k in &sc.sensors {
                    reports.push(validate_surrogate(&exp, k, &sc.channel, *samples));
                }
            }
            let passed = reports.iter().all(ValidationReport::passed);
            print_json(&ValidateOutput { scenario: sc.name, passed, reports })?;
            Ok(passed)
        }
        Command::Fit { csv } => {
            let fit = fit_error_curve(&read_fit_points(csv)?).map_err(|e| Error::Validation(e.to_string()))?;
            print_json(&fit)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
