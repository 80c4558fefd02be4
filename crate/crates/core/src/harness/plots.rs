//! Static SVG figures: one trajectory plot per scheme and bar charts of
//! collected bits and predicted model error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::Point;

use super::report::ComparisonReport;
use super::scenario::Scenario;
use super::sim::RunMetrics;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];

struct Frame {
    min: Point,
    scale: f64,
    height: f64,
}

impl Frame {
    fn new(scenario: &Scenario) -> Self {
        let ws = &scenario.workspace;
        let span = ws.max - ws.min;
        let scale = (WIDTH - 2.0 * MARGIN) / span.x;
        Self { min: ws.min, scale, height: span.y * scale + 2.0 * MARGIN }
    }

    fn map(&self, p: &Point) -> (f64, f64) {
        let x = MARGIN + (p.x - self.min.x) * self.scale;
        let y = self.height - MARGIN - (p.y - self.min.y) * self.scale;
        (x, y)
    }

    fn points(&self, pts: &[Point]) -> String {
        pts.iter()
            .map(|p| {
                let (x, y) = self.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn fmt_err(_: std::fmt::Error) -> Error {
    Error::Io(std::io::Error::other("formatting failed"))
}

/// Trajectory figure: obstacles black, sensors red, reference green,
/// trajectory blue, channel regions shaded.
pub fn trajectory_svg(scenario: &Scenario, run: &RunMetrics) -> Result<String> {
    let f = Frame::new(scenario);
    let mut s = header(WIDTH, f.height);
    for r in &scenario.channel.regions {
        writeln!(s, "<polygon points=\"{}\" fill=\"#f2e6b3\" stroke=\"#d4c27a\"/>", f.points(r.boundary.vertices())).map_err(fmt_err)?;
    }
    for o in &scenario.obstacles {
        writeln!(s, "<polygon points=\"{}\" fill=\"black\"/>", f.points(o.shape.vertices())).map_err(fmt_err)?;
    }
    let reference: Vec<Point> = scenario.reference.waypoints().iter().map(|w| w.position()).collect();
    writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"green\" stroke-width=\"2\" stroke-dasharray=\"6 4\"/>", f.points(&reference))
        .map_err(fmt_err)?;
    let path: Vec<Point> = run.trajectory.iter().map(|t| t.position()).collect();
    writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"blue\" stroke-width=\"2\"/>", f.points(&path)).map_err(fmt_err)?;
    for k in &scenario.sensors {
        let (x, y) = f.map(&k.position);
        writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"6\" fill=\"red\"/>").map_err(fmt_err)?;
        writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">sensor {}</text>", x + 8.0, y - 8.0, k.id).map_err(fmt_err)?;
    }
    for (label, p) in [("start", scenario.start.position()), ("goal", scenario.goal.position())] {
        let (x, y) = f.map(&p);
        writeln!(s, "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"none\" stroke=\"black\"/>", x - 4.0, y - 4.0).map_err(fmt_err)?;
        writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{label}</text>", x + 6.0, y + 16.0).map_err(fmt_err)?;
    }
    writeln!(
        s,
        "<text x=\"{MARGIN}\" y=\"20\" font-size=\"14\">{} on {}: {} ({} steps)</text>",
        run.scheme,
        scenario.name,
        if run.reached_goal { "goal reached" } else { "goal not reached" },
        run.steps_used
    )
    .map_err(fmt_err)?;
    s.push_str("</svg>\n");
    Ok(s)
}

/// Grouped bar chart: one group per series label, one bar per run.
fn bar_chart(title: &str, labels: &[String], runs: &[&RunMetrics], value: impl Fn(&RunMetrics, usize) -> f64) -> Result<String> {
    let height = 400.0;
    let mut s = header(WIDTH, height);
    let max = runs
        .iter()
        .flat_map(|r| (0..labels.len()).map(|i| value(r, i)))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let plot_h = height - 3.0 * MARGIN;
    let group_w = (WIDTH - 2.0 * MARGIN) / labels.len().max(1) as f64;
    let bar_w = group_w * 0.8 / runs.len().max(1) as f64;
    writeln!(s, "<text x=\"{MARGIN}\" y=\"20\" font-size=\"14\">{title}</text>").map_err(fmt_err)?;
    let base = height - 2.0 * MARGIN;
    writeln!(s, "<line x1=\"{MARGIN}\" y1=\"{base}\" x2=\"{:.0}\" y2=\"{base}\" stroke=\"black\"/>", WIDTH - MARGIN).map_err(fmt_err)?;
    for (g, label) in labels.iter().enumerate() {
        let gx = MARGIN + g as f64 * group_w + 0.1 * group_w;
        for (i, r) in runs.iter().enumerate() {
            let v = value(r, g);
            let h = plot_h * v / max;
            let x = gx + i as f64 * bar_w;
            writeln!(
                s,
                "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"><title>{} {label}: {v:.6e}</title></rect>",
                base - h,
                bar_w * 0.9,
                PALETTE[i % PALETTE.len()],
                r.scheme
            )
            .map_err(fmt_err)?;
        }
        writeln!(s, "<text x=\"{gx:.2}\" y=\"{:.2}\" font-size=\"12\">{label}</text>", base + 16.0).map_err(fmt_err)?;
    }
    for (i, r) in runs.iter().enumerate() {
        let x = MARGIN + i as f64 * 140.0;
        let y = height - 12.0;
        writeln!(s, "<rect x=\"{x:.0}\" y=\"{:.0}\" width=\"10\" height=\"10\" fill=\"{}\"/>", y - 10.0, PALETTE[i % PALETTE.len()]).map_err(fmt_err)?;
        writeln!(s, "<text x=\"{:.0}\" y=\"{y:.0}\" font-size=\"12\">{}</text>", x + 14.0, r.scheme).map_err(fmt_err)?;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Write one trajectory SVG per run plus `bits.svg` and `errors.svg`.
pub fn emit_plots(report: &ComparisonReport, scenario: &Scenario, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.runs.is_empty() {
        return Err(Error::Validation("report has no runs to plot".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for run in &report.runs {
        let path = out_dir.join(format!("trajectory_{}.svg", run.scheme));
        fs::write(&path, trajectory_svg(scenario, run)?)?;
        written.push(path);
    }
    let runs: Vec<&RunMetrics> = report.runs.iter().collect();
    let sensors: Vec<usize> = scenario.sensors.iter().map(|k| k.id).collect();
    let labels: Vec<String> = sensors.iter().map(|id| format!("sensor {id}")).collect();
    let bits = bar_chart("Collected bits per sensor", &labels, &runs, |r, i| {
        r.collected_bits.get(&sensors[i]).copied().unwrap_or(0.0)
    })?;
    let path = out_dir.join("bits.svg");
    fs::write(&path, bits)?;
    written.push(path);

    let models: Vec<String> = scenario.models.iter().map(|m| m.name.clone()).collect();
    let errors = bar_chart("Predicted classification error per model", &models, &runs, |r, i| {
        r.model_errors.get(&models[i]).copied().unwrap_or(0.0)
    })?;
    let path = out_dir.join("errors.svg");
    fs::write(&path, errors)?;
    written.push(path);
    Ok(written)
}
