//! Scheme comparison and report files.

use serde::Serialize;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::par::{self, ExecMode};

use super::scenario::Scenario;
use super::sim::{run_with, RunMetrics, SchemeId};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub runs: Vec<RunMetrics>,
}

impl ComparisonReport {
    pub fn get(&self, scheme: SchemeId) -> Option<&RunMetrics> {
        self.runs.iter().find(|r| r.scheme == scheme)
    }
}

/// Run every scheme on the scenario. Schemes are independent and may run
/// concurrently; the report keeps the requested order.
pub fn compare(scenario: &Scenario, schemes: &[SchemeId], seed: u64, exec: ExecMode) -> Result<ComparisonReport> {
    if schemes.len() < 2 {
        return Err(Error::Validation("compare needs at least two schemes".into()));
    }
    let unique: BTreeSet<_> = schemes.iter().collect();
    if unique.len() != schemes.len() {
        return Err(Error::Validation("compare got a scheme twice".into()));
    }
    let runs = par::map(exec, schemes, |&s| run_with(scenario, s, seed, exec));
    Ok(ComparisonReport { scenario: scenario.name.clone(), runs: runs.into_iter().collect::<Result<_>>()? })
}

/// Flat table, one row per run.
pub fn metrics_csv(runs: &[RunMetrics]) -> Result<String> {
    let sensor_ids: BTreeSet<usize> = runs.iter().flat_map(|r| r.collected_bits.keys().copied()).collect();
    let model_names: BTreeSet<&String> = runs.iter().flat_map(|r| r.model_errors.keys()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "scenario",
        "scheme",
        "reached_goal",
        "termination",
        "steps_used",
        "final_goal_distance",
        "min_obstacle_distance",
        "total_bits",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(sensor_ids.iter().map(|id| format!("bits_sensor_{id}")));
    header.extend(model_names.iter().map(|n| format!("error_{n}")));
    header.extend(
        ["mean_model_error", "mean_mm_iterations", "max_mm_iterations", "relaxed_steps", "stopped_steps"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header).map_err(csv_err)?;
    for r in runs {
        let mut row = vec![
            r.scenario.clone(),
            r.scheme.to_string(),
            r.reached_goal.to_string(),
            serde_json::to_value(r.termination).map_err(|e| Error::Parse(e.to_string()))?.as_str().unwrap_or("").to_string(),
            r.steps_used.to_string(),
            r.final_goal_distance.to_string(),
            r.min_obstacle_distance.to_string(),
            r.total_bits.to_string(),
        ];
        row.extend(sensor_ids.iter().map(|id| r.collected_bits.get(id).map_or(String::new(), f64::to_string)));
        row.extend(model_names.iter().map(|n| r.model_errors.get(*n).map_or(String::new(), f64::to_string)));
        let n = r.mm_iterations.len().max(1) as f64;
        row.push(r.mean_model_error.to_string());
        row.push((r.mm_iterations.iter().sum::<usize>() as f64 / n).to_string());
        row.push(r.mm_iterations.iter().max().copied().unwrap_or(0).to_string());
        row.push(r.relaxed_steps.to_string());
        row.push(r.stopped_steps.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

#[derive(Serialize)]
struct TimingRow<'a> {
    scheme: &'a str,
    total_s: f64,
    max_step_s: f64,
    mean_step_s: f64,
}

/// Write `metrics.json`, `metrics.csv` and the non-reproducible
/// `timing.json` into `out_dir`.
pub fn write_metrics(runs: &[RunMetrics], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let json = if runs.len() == 1 {
        serde_json::to_string_pretty(&runs[0])
    } else {
        serde_json::to_string_pretty(&runs)
    }
    .map_err(|e| Error::Parse(e.to_string()))?;
    let paths = [out_dir.join("metrics.json"), out_dir.join("metrics.csv"), out_dir.join("timing.json")];
    fs::write(&paths[0], json + "\n")?;
    fs::write(&paths[1], metrics_csv(runs)?)?;
    let timing: Vec<TimingRow> = runs
        .iter()
        .map(|r| TimingRow {
            scheme: r.scheme.name(),
            total_s: r.timing.total_s,
            max_step_s: r.timing.max_step_s,
            mean_step_s: r.timing.mean_step_s,
        })
        .collect();
    fs::write(&paths[2], serde_json::to_string_pretty(&timing).map_err(|e| Error::Parse(e.to_string()))? + "\n")?;
    Ok(paths.to_vec())
}
