//! Scenarios, closed-loop simulation, scheme comparison and reporting.

pub mod plots;
pub mod report;
pub mod scenario;
pub mod sim;

pub use plots::emit_plots;
pub use report::{compare, write_metrics, ComparisonReport};
pub use scenario::{load_scenario, parse_scenario, Scenario};
pub use sim::{run, run_with, RunMetrics, SchemeId, Termination};
