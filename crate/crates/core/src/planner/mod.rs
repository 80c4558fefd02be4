//! Communication- and learning-aware trajectory planning.
//!
//! [`plan_horizon`] runs the majorization-minimization loop: expand the
//! surrogate and the collision halfspaces at the current iterate, solve the
//! convex program, and accept the new iterate only when the true objective
//! does not increase. [`mpc_step`] wraps it in a receding-horizon step with
//! warm starting and infeasibility recovery.

pub mod costs;
pub mod ipm;
pub mod reference;
pub mod subproblem;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMap, Sensor};
use crate::error::{Error, Result};
use crate::geometry::{min_distance_placed, ConvexPolytope, DistanceCertificate, Placement, Point};
use crate::kinematics::{linearize_vector, wrap_angle, ControlInput, LinearizedDynamics, MotionLimits, RobotState};
use crate::learning::ModelSpec;
use crate::par::{self, ExecMode};

pub use costs::{cost_communication, cost_learning, cost_safety, cost_tracking};
pub use ipm::KktResiduals;
pub use reference::{extract_reference, ReferencePath};
pub use subproblem::{build_subproblem, solve_subproblem, ConvexProgram, Expansion};

/// Objective weights `(alpha0, alpha1, alpha2, alpha3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    pub tracking: f64,
    pub communication: f64,
    pub learning: f64,
    pub safety: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { tracking: 1.0, communication: 0.3, learning: 1e3, safety: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub weights: Weights,
    pub horizon: usize,
    pub d_min: f64,
    pub d_max: f64,
    /// Threshold on `|| Gamma - Gamma~ ||_2` over all sensors and steps.
    pub mm_tolerance: f64,
    pub mm_max_iters: usize,
    pub kkt_tolerance: f64,
    /// Reference speed along the path, m/s.
    pub reference_speed: f64,
    #[serde(skip)]
    pub exec: ExecMode,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            weights: Weights::default(),
            horizon: 20,
            d_min: 0.1,
            d_max: 0.5,
            mm_tolerance: 1e-2,
            mm_max_iters: 15,
            kkt_tolerance: 1e-6,
            reference_speed: 1.0,
            exec: ExecMode::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        let weights = [w.tracking, w.communication, w.learning, w.safety];
        if weights.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Validation("planner weights must be finite and nonnegative".into()));
        }
        if self.horizon < 1 {
            return Err(Error::Validation("horizon must be at least 1".into()));
        }
        if !(self.d_min > 0.0 && self.d_min <= self.d_max) {
            return Err(Error::Validation("need 0 < d_min <= d_max".into()));
        }
        if !(self.mm_tolerance > 0.0) || self.mm_max_iters < 1 || !(self.kkt_tolerance > 0.0) {
            return Err(Error::Validation("mm_tolerance, mm_max_iters and kkt_tolerance must be positive".into()));
        }
        if !(self.reference_speed > 0.0) {
            return Err(Error::Validation("reference_speed must be positive".into()));
        }
        Ok(())
    }
}

/// How collisions are modeled in the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ShapeModel {
    /// Exact robot and obstacle polygons.
    #[default]
    Polytope,
    /// Circles circumscribing robot and obstacles about their reference points.
    PointMass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    /// World-frame polygon.
    pub shape: ConvexPolytope,
    /// Reference point `o_m`.
    pub center: Point,
    /// Circumscribed radius about `center`.
    pub radius: f64,
}

impl Obstacle {
    pub fn new(shape: ConvexPolytope, center: Point) -> Self {
        let radius = shape.radius_about(&center);
        Self { shape, center, radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: Point,
    pub max: Point,
}

impl Workspace {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Everything the planner needs to know about the world.
#[derive(Debug, Clone)]
pub struct Environment {
    /// Robot body in its own frame.
    pub robot_shape: ConvexPolytope,
    pub obstacles: Vec<Obstacle>,
    pub sensors: Vec<Sensor>,
    pub channel: ChannelMap,
    pub models: Vec<ModelSpec>,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    pub limits: MotionLimits,
    pub reference: ReferencePath,
    pub workspace: Option<Workspace>,
    pub shape_model: ShapeModel,
}

impl Environment {
    /// Largest distance from the robot's reference point to its boundary.
    pub fn robot_radius(&self) -> f64 {
        self.robot_shape.radius_about(&Point::zeros())
    }
}

/// Per-term objective values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub tracking: f64,
    pub communication: f64,
    pub learning: f64,
    pub safety: f64,
}

impl CostBreakdown {
    pub fn weighted(&self, w: &Weights) -> f64 {
        w.tracking * self.tracking + w.communication * self.communication + w.learning * self.learning + w.safety * self.safety
    }
}

#[derive(Debug, Clone)]
pub struct HorizonSolution {
    pub states: Vec<RobotState>,
    pub inputs: Vec<ControlInput>,
    pub safety_distances: Vec<f64>,
    /// `certificates[m][h]` for obstacle `m` at step `h`.
    pub certificates: Vec<Vec<DistanceCertificate>>,
    pub reference: Vec<RobotState>,
    /// True objective at the returned iterate.
    pub objective_value: f64,
    /// True objective after each accepted MM iteration.
    pub objective_history: Vec<f64>,
    pub mm_iterations: usize,
    pub converged: bool,
    pub surrogate_gap: f64,
    pub costs: CostBreakdown,
    pub kkt: KktResiduals,
    /// Solved with the safety floor halved.
    pub relaxed: bool,
    /// Planning failed and the robot was told to stop.
    pub stopped: bool,
    /// Unwrapped state vectors, for warm starts.
    raw_states: Vec<Vector3<f64>>,
}

impl HorizonSolution {
    pub fn raw_states(&self) -> &[Vector3<f64>] {
        &self.raw_states
    }

    fn stop(state: &RobotState, last: ControlInput, horizon: usize, d_min: f64) -> Self {
        let input = ControlInput::new(0.0, last.psi);
        Self {
            states: vec![*state; horizon + 1],
            inputs: vec![input; horizon],
            safety_distances: vec![d_min; horizon + 1],
            certificates: Vec::new(),
            reference: Vec::new(),
            objective_value: f64::NAN,
            objective_history: Vec::new(),
            mm_iterations: 0,
            converged: false,
            surrogate_gap: f64::NAN,
            costs: CostBreakdown::default(),
            kkt: KktResiduals::default(),
            relaxed: true,
            stopped: true,
            raw_states: vec![state.to_vector(); horizon + 1],
        }
    }
}

fn unwrap_near(theta: f64, anchor: f64) -> f64 {
    anchor + wrap_angle(theta - anchor)
}

/// Unwrapped headings along a pose sequence, the first chosen near `anchor`.
fn unwrap_sequence(states: &[RobotState], anchor: f64) -> Vec<Vector3<f64>> {
    let mut prev = anchor;
    states
        .iter()
        .map(|s| {
            prev = unwrap_near(s.theta, prev);
            Vector3::new(s.x, s.y, prev)
        })
        .collect()
}

/// True objective on concrete states.
pub fn evaluate_costs(
    env: &Environment,
    states: &[RobotState],
    reference: &[RobotState],
    distances: &[f64],
) -> Result<CostBreakdown> {
    Ok(CostBreakdown {
        tracking: cost_tracking(states, reference)?,
        communication: cost_communication(states, &env.sensors, &env.channel),
        learning: if env.models.is_empty() {
            0.0
        } else {
            cost_learning(states, &env.sensors, &env.channel, &env.models, env.bandwidth, env.limits.step)
        },
        safety: -distances.iter().sum::<f64>(),
    })
}

/// Where a plan starts from.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlanOptions<'a> {
    /// Previous solution to shift forward.
    pub warm_start: Option<&'a HorizonSolution>,
    /// Input applied in the previous control period.
    pub last_input: Option<ControlInput>,
    /// Halve the lower safety bound.
    pub relaxed: bool,
}

/// One MM solve from a cold start.
pub fn plan_horizon(state: &RobotState, env: &Environment, config: &PlannerConfig) -> Result<HorizonSolution> {
    plan_horizon_with(state, env, config, &PlanOptions::default())
}

struct Seed {
    lin_states: Vec<Vector3<f64>>,
    lin_inputs: Vec<ControlInput>,
    inputs: Vec<ControlInput>,
    distances: Vec<f64>,
}

fn seed(
    state: &RobotState,
    reference: &[Vector3<f64>],
    config: &PlannerConfig,
    limits: &MotionLimits,
    opts: &PlanOptions,
) -> Seed {
    let horizon = config.horizon;
    match opts.warm_start.filter(|p| p.inputs.len() == horizon && !p.stopped) {
        // Linearizing at standstill would leave steering without effect on
        // the heading, so the cold model moves at the reference speed.
        None => Seed {
            lin_states: reference[..horizon].to_vec(),
            lin_inputs: vec![ControlInput::new(config.reference_speed.clamp(limits.u_min.v, limits.u_max.v), 0.0); horizon],
            inputs: vec![ControlInput::default(); horizon],
            distances: vec![config.d_min; horizon + 1],
        },
        Some(prev) => {
            let shift = |v: &[Vector3<f64>]| -> Vec<Vector3<f64>> {
                let mut out: Vec<Vector3<f64>> = v[1..].to_vec();
                out.push(*v.last().unwrap());
                out
            };
            let mut lin_states = shift(&prev.raw_states);
            // Re-anchor the heading branch on the current state.
            let k = unwrap_near(lin_states[0].z, state.theta) - lin_states[0].z;
            for s in &mut lin_states {
                s.z += k;
            }
            lin_states.truncate(horizon);
            let mut inputs: Vec<ControlInput> = prev.inputs[1..].to_vec();
            inputs.push(*prev.inputs.last().unwrap());
            let mut distances: Vec<f64> = prev.safety_distances[1..].to_vec();
            distances.push(*prev.safety_distances.last().unwrap());
            Seed { lin_states, lin_inputs: inputs.clone(), inputs, distances }
        }
    }
}

/// One MM solve with explicit seeding options.
pub fn plan_horizon_with(
    state: &RobotState,
    env: &Environment,
    config: &PlannerConfig,
    opts: &PlanOptions,
) -> Result<HorizonSolution> {
    config.validate()?;
    let horizon = config.horizon;
    let layout = subproblem::Layout { horizon };
    let reference_states = extract_reference(&env.reference, state, config, env.limits.step);
    let reference = unwrap_sequence(&reference_states, state.theta);
    let seed = seed(state, &reference, config, &env.limits, opts);
    let linearization: Vec<LinearizedDynamics> = seed
        .lin_states
        .iter()
        .zip(&seed.lin_inputs)
        .map(|(s, u)| linearize_vector(s, u, &env.limits))
        .collect::<Result<_>>()?;
    let s0 = Vector3::new(state.x, state.y, state.theta);
    let map = subproblem::StateMap::new(&s0, &linearization);
    let d_floor = if opts.relaxed { 0.5 * config.d_min } else { config.d_min };

    let mut x = DVector::zeros(layout.dim());
    for (h, u) in seed.inputs.iter().enumerate() {
        x[layout.u(h, 0)] = u.v;
        x[layout.u(h, 1)] = u.psi;
    }
    for (h, d) in seed.distances.iter().enumerate() {
        x[layout.d(h)] = d.clamp(d_floor, config.d_max);
    }

    let true_objective = |x: &DVector<f64>| -> Result<(f64, CostBreakdown)> {
        let states: Vec<RobotState> = map.states(x).iter().map(RobotState::from_vector).collect();
        let costs = evaluate_costs(env, &states, &reference_states, &layout.distances(x))?;
        Ok((costs.weighted(&config.weights), costs))
    };

    let mut history: Vec<f64> = Vec::new();
    let mut kkt = KktResiduals::default();
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..config.mm_max_iters {
        let exp = Expansion { states: map.states(&x), last_input: opts.last_input, d_floor };
        let program = build_subproblem(env, &exp, &linearization, &reference, config)?;
        let sol = match solve_subproblem(&program, &x, config) {
            Ok(s) => s,
            Err(e) if it == 0 => return Err(Error::NoProgress(e.to_string())),
            Err(e) => {
                log::warn!("MM iteration {it} failed, keeping the previous iterate: {e}");
                break;
            }
        };
        iterations += 1;
        kkt = sol.residuals;
        let (mut j, _) = true_objective(&sol.x)?;
        let mut next = sol.x;
        if let Some(&prev) = history.last() {
            if j > prev {
                // The frozen regions or the tau bound made the step worse in
                // the true objective; shrink toward the accepted iterate.
                let dir = &next - &x;
                let mut t = 0.5;
                let mut found = None;
                for _ in 0..10 {
                    let cand = &x + &dir * t;
                    let (jc, _) = true_objective(&cand)?;
                    if jc <= prev {
                        found = Some((cand, jc));
                        break;
                    }
                    t *= 0.5;
                }
                match found {
                    Some((cand, jc)) => {
                        next = cand;
                        j = jc;
                    }
                    None => {
                        converged = gap < config.mm_tolerance;
                        break;
                    }
                }
            }
        }
        gap = program.surrogate_gap(&next, env);
        let stalled = history.last().is_some_and(|&p| p - j <= 1e-9 * (1.0 + p.abs()));
        x = next;
        history.push(j);
        if gap < config.mm_tolerance || stalled {
            converged = true;
            break;
        }
    }

    let raw_states = map.states(&x);
    let states: Vec<RobotState> = raw_states.iter().map(RobotState::from_vector).collect();
    let distances = layout.distances(&x);
    let (objective_value, costs) = true_objective(&x)?;
    let certificates = certificates(env, &states, &distances, config.exec)?;
    Ok(HorizonSolution {
        inputs: layout.inputs(&x),
        states,
        safety_distances: distances,
        certificates,
        reference: reference_states,
        objective_value,
        objective_history: history,
        mm_iterations: iterations,
        converged,
        surrogate_gap: gap,
        costs,
        kkt,
        relaxed: opts.relaxed,
        stopped: false,
        raw_states,
    })
}

/// Exact distance certificates for every obstacle and step.
pub fn certificates(
    env: &Environment,
    states: &[RobotState],
    distances: &[f64],
    mode: ExecMode,
) -> Result<Vec<Vec<DistanceCertificate>>> {
    let per_obstacle = par::map(mode, &env.obstacles, |o| {
        states
            .iter()
            .zip(distances)
            .map(|(s, d)| {
                let mut c = min_distance_placed(&env.robot_shape, &Placement::from_state(s), &o.shape)?;
                c.slack = (c.distance - d).max(0.0);
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()
    });
    per_obstacle.into_iter().collect()
}

/// Plan and return the first input, with the relaxed retry and the stop
/// fallback.
pub fn mpc_step(
    state: &RobotState,
    env: &Environment,
    config: &PlannerConfig,
    previous: Option<&HorizonSolution>,
) -> Result<(ControlInput, HorizonSolution)> {
    let last_input = previous.map_or(ControlInput::default(), |p| p.inputs[0]);
    mpc_step_from(state, env, config, previous, last_input)
}

fn mpc_step_from(
    state: &RobotState,
    env: &Environment,
    config: &PlannerConfig,
    previous: Option<&HorizonSolution>,
    last_input: ControlInput,
) -> Result<(ControlInput, HorizonSolution)> {
    config.validate()?;
    let mut opts = PlanOptions { warm_start: previous, last_input: Some(last_input), relaxed: false };
    let first = plan_horizon_with(state, env, config, &opts);
    let sol = match first {
        Ok(s) => s,
        Err(e) => {
            log::info!("plan failed ({e}); retrying with a relaxed safety floor");
            opts.relaxed = true;
            match plan_horizon_with(state, env, config, &opts) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("relaxed plan failed ({e}); stopping");
                    HorizonSolution::stop(state, last_input, config.horizon, config.d_min)
                }
            }
        }
    };
    Ok((sol.inputs[0], sol))
}

/// Receding-horizon controller carrying its warm start.
#[derive(Debug, Clone)]
pub struct MpcPlanner {
    pub config: PlannerConfig,
    previous: Option<HorizonSolution>,
    last_input: ControlInput,
}

impl MpcPlanner {
    pub fn new(config: PlannerConfig) -> Self {
        Self { config, previous: None, last_input: ControlInput::default() }
    }

    pub fn previous(&self) -> Option<&HorizonSolution> {
        self.previous.as_ref()
    }

    pub fn step(&mut self, state: &RobotState, env: &Environment) -> Result<(ControlInput, &HorizonSolution)> {
        let warm = self.previous.as_ref().filter(|p| !p.stopped);
        let (u, sol) = mpc_step_from(state, env, &self.config, warm, self.last_input)?;
        self.last_input = u;
        self.previous = Some(sol);
        Ok((u, self.previous.as_ref().unwrap()))
    }
}
