//! Closed-loop simulation of one scheme on one scenario.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::channel::collected_bits;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kinematics::{nonlinear_step, RobotState};
use crate::learning::{classification_error, samples_from_bits};
use crate::par::ExecMode;
use crate::planner::subproblem::clearances;
use crate::planner::{Environment, MpcPlanner, PlannerConfig, ShapeModel};

use super::scenario::Scenario;

/// Deadlock window, steps.
pub const DEADLOCK_WINDOW: usize = 40;
/// Minimum net progress toward the goal over the window, meters.
pub const DEADLOCK_PROGRESS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "CLD")]
    Cld,
    #[serde(rename = "RDA")]
    Rda,
    #[serde(rename = "RDA_COMMU")]
    RdaCommu,
    #[serde(rename = "PMM_COMMU")]
    PmmCommu,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::Cld, SchemeId::Rda, SchemeId::RdaCommu, SchemeId::PmmCommu];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Cld => "CLD",
            SchemeId::Rda => "RDA",
            SchemeId::RdaCommu => "RDA_COMMU",
            SchemeId::PmmCommu => "PMM_COMMU",
        }
    }

    /// Planner configuration with this scheme's weight toggles applied.
    pub fn configure(self, base: &PlannerConfig) -> PlannerConfig {
        let mut c = base.clone();
        match self {
            SchemeId::Cld => {}
            SchemeId::Rda => {
                c.weights.communication = 0.0;
                c.weights.learning = 0.0;
            }
            SchemeId::RdaCommu | SchemeId::PmmCommu => c.weights.learning = 0.0,
        }
        c
    }

    pub fn shape_model(self) -> ShapeModel {
        match self {
            SchemeId::PmmCommu => ShapeModel::PointMass,
            _ => ShapeModel::Polytope,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace(['-', '+'], "_");
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == key)
            .ok_or_else(|| Error::Validation(format!("unknown scheme `{s}` (expected CLD, RDA, RDA_COMMU or PMM_COMMU)")))
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Goal,
    Deadlock,
    MaxSteps,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timing {
    pub total_s: f64,
    pub max_step_s: f64,
    pub mean_step_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub scheme: SchemeId,
    pub seed: u64,
    pub trajectory: Vec<RobotState>,
    pub reached_goal: bool,
    pub termination: Termination,
    pub steps_used: usize,
    pub final_goal_distance: f64,
    /// Smallest exact clearance between the robot and any obstacle
    /// (infinite, serialized as null, without obstacles).
    pub min_obstacle_distance: f64,
    /// Bits per sensor id.
    pub collected_bits: BTreeMap<usize, f64>,
    pub total_bits: f64,
    /// Predicted classification error per model name.
    pub model_errors: BTreeMap<String, f64>,
    pub mean_model_error: f64,
    pub mm_iterations: Vec<usize>,
    /// Whether each step's MM loop met its convergence test.
    pub mm_converged: Vec<bool>,
    /// Largest increase of the true objective between consecutive MM
    /// iterates over all steps (nonpositive when descent held).
    pub max_objective_increase: f64,
    /// Largest KKT residual reported by any subproblem solve.
    pub max_kkt_residual: f64,
    pub relaxed_steps: usize,
    pub stopped_steps: usize,
    pub error: Option<String>,
    /// Excluded from serialized output so reports are byte-reproducible.
    #[serde(skip)]
    pub timing: Timing,
}

fn goal_distance(s: &RobotState, goal: &RobotState) -> f64 {
    (s.position() - goal.position()).norm()
}

fn min_clearance(env: &Environment, s: &RobotState) -> Result<f64> {
    Ok(clearances(env, &s.to_vector())?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Closed-loop run of `scheme`. Planner failures end the run and are
/// recorded in the metrics rather than returned.
pub fn run(scenario: &Scenario, scheme: SchemeId, seed: u64) -> Result<RunMetrics> {
    run_with(scenario, scheme, seed, ExecMode::default())
}

pub fn run_with(scenario: &Scenario, scheme: SchemeId, seed: u64, exec: ExecMode) -> Result<RunMetrics> {
    let mut config = scheme.configure(&scenario.planner);
    config.exec = exec;
    let env = scenario.environment(scheme.shape_model());
    // The clearance metric always uses the true shapes.
    let truth = scenario.environment(ShapeModel::Polytope);

    let mut state = scenario.start;
    if scenario.start_jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scenario.start_jitter).map_err(|e| Error::Validation(e.to_string()))?;
        state.x += normal.sample(&mut rng);
        state.y += normal.sample(&mut rng);
    }

    let started = Instant::now();
    let mut planner = MpcPlanner::new(config);
    let mut trajectory = vec![state];
    let mut goal_dist = vec![goal_distance(&state, &scenario.goal)];
    let mut min_dist = min_clearance(&truth, &state)?;
    let mut mm_iterations = Vec::new();
    let mut mm_converged = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    let mut max_kkt: f64 = 0.0;
    let (mut relaxed, mut stopped) = (0, 0);
    let mut error = None;
    let mut step_times = Vec::new();
    let mut termination = Termination::MaxSteps;

    for _ in 0..scenario.max_steps {
        if goal_dist.last().copied().unwrap_or(f64::INFINITY) <= scenario.goal_tolerance {
            termination = Termination::Goal;
            break;
        }
        let t = Instant::now();
        let step = planner.step(&state, &env);
        step_times.push(t.elapsed().as_secs_f64());
        let (u, sol) = match step {
            Ok(v) => v,
            Err(e) => {
                error = Some(e.to_string());
                termination = Termination::Error;
                break;
            }
        };
        mm_iterations.push(sol.mm_iterations);
        mm_converged.push(sol.converged);
        for w in sol.objective_history.windows(2) {
            max_increase = max_increase.max(w[1] - w[0]);
        }
        max_kkt = max_kkt.max(sol.kkt.max());
        relaxed += usize::from(sol.relaxed && !sol.stopped);
        stopped += usize::from(sol.stopped);

        state = match nonlinear_step(&state, &u, &scenario.limits) {
            Ok(s) => s,
            Err(e) => {
                error = Some(e.to_string());
                termination = Termination::Error;
                break;
            }
        };
        trajectory.push(state);
        goal_dist.push(goal_distance(&state, &scenario.goal));
        min_dist = min_dist.min(min_clearance(&truth, &state)?);

        let n = goal_dist.len();
        if n > DEADLOCK_WINDOW && goal_dist[n - 1 - DEADLOCK_WINDOW] - goal_dist[n - 1] < DEADLOCK_PROGRESS {
            termination = Termination::Deadlock;
            break;
        }
    }
    if termination == Termination::MaxSteps && *goal_dist.last().unwrap() <= scenario.goal_tolerance {
        termination = Termination::Goal;
    }

    let positions: Vec<Point> = trajectory.iter().map(RobotState::position).collect();
    let bits: BTreeMap<usize, f64> = scenario
        .sensors
        .iter()
        .map(|k| (k.id, collected_bits(&positions, k, &scenario.channel, scenario.bandwidth, scenario.step())))
        .collect();
    let known: BTreeSet<usize> = scenario.sensors.iter().map(|k| k.id).collect();
    let mut model_errors = BTreeMap::new();
    for spec in &scenario.models {
        let n = samples_from_bits(spec, &bits, &known)?;
        model_errors.insert(spec.name.clone(), classification_error(spec, n)?);
    }
    let mean_model_error = model_errors.values().sum::<f64>() / model_errors.len().max(1) as f64;
    let total = started.elapsed().as_secs_f64();

    Ok(RunMetrics {
        scenario: scenario.name.clone(),
        scheme,
        seed,
        reached_goal: termination == Termination::Goal,
        termination,
        steps_used: trajectory.len() - 1,
        final_goal_distance: *goal_dist.last().unwrap(),
        min_obstacle_distance: min_dist,
        total_bits: bits.values().sum(),
        collected_bits: bits,
        model_errors,
        mean_model_error,
        mm_iterations,
        mm_converged,
        max_objective_increase: if max_increase.is_finite() { max_increase } else { 0.0 },
        max_kkt_residual: max_kkt,
        relaxed_steps: relaxed,
        stopped_steps: stopped,
        error,
        trajectory,
        timing: Timing {
            total_s: total,
            max_step_s: step_times.iter().copied().fold(0.0, f64::max),
            mean_step_s: step_times.iter().sum::<f64>() / step_times.len().max(1) as f64,
        },
    })
}
