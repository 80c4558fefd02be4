//! Scenario files.
//!
//! Scenarios are TOML documents. Angles are given in degrees (`*_deg`) and
//! powers either in watts (`power_w`) or dBm (`power_dbm`); both are
//! converted on load. See `scenarios/reference.toml` for a full example.

use serde::Deserialize;
use std::collections::BTreeSet;
use std::path::Path;

use crate::channel::{dbm_to_watts, ChannelMap, PathLoss, Sensor, SubRegion};
use crate::error::{Error, Result};
use crate::geometry::{min_distance_placed, ConvexPolytope, Placement, Point};
use crate::kinematics::{ControlInput, MotionLimits, RobotState};
use crate::learning::ModelSpec;
use crate::planner::{Environment, Obstacle, PlannerConfig, ReferencePath, ShapeModel, Workspace};

/// Schema version understood by this build.
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub version: u32,
    pub workspace: Workspace,
    pub robot_shape: ConvexPolytope,
    pub start: RobotState,
    pub goal: RobotState,
    pub obstacles: Vec<Obstacle>,
    pub sensors: Vec<Sensor>,
    pub channel: ChannelMap,
    pub reference: ReferencePath,
    pub models: Vec<ModelSpec>,
    /// Hz.
    pub bandwidth: f64,
    /// Motion limits; `limits.step` is the slot length `T0`.
    pub limits: MotionLimits,
    pub planner: PlannerConfig,
    pub max_steps: usize,
    /// Meters, position only.
    pub goal_tolerance: f64,
    /// Standard deviation of a seeded start-position perturbation (0 = off).
    pub start_jitter: f64,
}

impl Scenario {
    pub fn environment(&self, shape_model: ShapeModel) -> Environment {
        Environment {
            robot_shape: self.robot_shape.clone(),
            obstacles: self.obstacles.clone(),
            sensors: self.sensors.clone(),
            channel: self.channel.clone(),
            models: self.models.clone(),
            bandwidth: self.bandwidth,
            limits: self.limits,
            reference: self.reference.clone(),
            workspace: Some(self.workspace),
            shape_model,
        }
    }

    pub fn step(&self) -> f64 {
        self.limits.step
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    version: u32,
    name: String,
    #[serde(default = "default_max_steps")]
    max_steps: usize,
    #[serde(default = "default_goal_tolerance")]
    goal_tolerance_m: f64,
    bandwidth_hz: f64,
    slot_s: f64,
    #[serde(default)]
    start_jitter_m: f64,
    workspace: RawWorkspace,
    robot: RawRobot,
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
    sensors: Vec<RawSensor>,
    channel: RawChannel,
    reference: RawReference,
    models: Vec<RawModel>,
    #[serde(default)]
    planner: PlannerConfig,
}

fn default_max_steps() -> usize {
    400
}

fn default_goal_tolerance() -> f64 {
    0.3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkspace {
    min: [f64; 2],
    max: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    x: f64,
    y: f64,
    #[serde(default)]
    theta_deg: f64,
}

impl RawPose {
    fn state(&self) -> RobotState {
        RobotState::new(self.x, self.y, self.theta_deg.to_radians())
    }
}

/// A polygon given by vertices or by `normals`/`offsets` face rows.
#[derive(Debug, Deserialize)]
struct RawPolygon {
    vertices: Option<Vec<[f64; 2]>>,
    normals: Option<Vec<[f64; 2]>>,
    offsets: Option<Vec<f64>>,
}

impl RawPolygon {
    fn build(&self, what: &str) -> Result<ConvexPolytope> {
        let poly = match (&self.vertices, &self.normals, &self.offsets) {
            (Some(v), None, None) => {
                let pts: Vec<Point> = v.iter().map(|p| Point::new(p[0], p[1])).collect();
                ConvexPolytope::from_vertices(&pts)
            }
            (None, Some(n), Some(o)) => ConvexPolytope::from_halfspaces(n, o),
            _ => {
                return Err(Error::Validation(format!("{what}: give either `vertices` or both `normals` and `offsets`")))
            }
        };
        poly.map_err(|e| Error::Validation(format!("{what}: {e}")))
    }
}

#[derive(Debug, Deserialize)]
struct RawRobot {
    #[serde(flatten)]
    shape: RawPolygon,
    start: RawPose,
    goal: RawPose,
    #[serde(default)]
    limits: RawLimits,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawLimits {
    wheelbase_m: f64,
    v_min_mps: f64,
    v_max_mps: f64,
    steer_max_deg: f64,
    dv_max_mps: f64,
    dsteer_max_deg: f64,
}

impl Default for RawLimits {
    fn default() -> Self {
        let d = MotionLimits::default();
        Self {
            wheelbase_m: d.wheelbase,
            v_min_mps: d.u_min.v,
            v_max_mps: d.u_max.v,
            steer_max_deg: d.u_max.psi.to_degrees(),
            dv_max_mps: d.a_max.v,
            dsteer_max_deg: d.a_max.psi.to_degrees(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawObstacle {
    #[serde(flatten)]
    shape: RawPolygon,
    /// Reference point; defaults to the centroid.
    center: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    id: usize,
    position: [f64; 2],
    power_w: Option<f64>,
    power_dbm: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPathLoss {
    beta: f64,
    alpha: f64,
}

#[derive(Debug, Deserialize)]
struct RawRegion {
    #[serde(flatten)]
    shape: RawPolygon,
    beta: f64,
    alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    noise_dbm: f64,
    default: RawPathLoss,
    #[serde(default)]
    regions: Vec<RawRegion>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    /// `[x, y]` or `[x, y, theta_deg]`.
    waypoints: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    a: f64,
    b: f64,
    historical_samples: f64,
    bits_per_sample: f64,
    sensors: Vec<usize>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn check_path_loss(what: &str, beta: f64, alpha: f64) -> Result<PathLoss> {
    if !(beta >= 0.0 && beta.is_finite()) || !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Validation(format!("{what}: need beta >= 0 and alpha >= 0")));
    }
    // The surrogate is concave only for alpha = 0 or alpha >= 1.
    if alpha > 0.0 && alpha < 1.0 {
        return Err(Error::Validation(format!("{what}: path-loss exponent {alpha} in (0, 1) is not supported")));
    }
    Ok(PathLoss { beta, alpha })
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if raw.version != SCENARIO_VERSION {
        return Err(Error::Validation(format!(
            "unsupported scenario version {} (expected {SCENARIO_VERSION})",
            raw.version
        )));
    }
    let positive = |what: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Validation(format!("{what} must be positive, got {v}")))
        }
    };
    let bandwidth = positive("bandwidth_hz", raw.bandwidth_hz)?;
    let step = positive("slot_s", raw.slot_s)?;
    let goal_tolerance = positive("goal_tolerance_m", raw.goal_tolerance_m)?;
    if !(raw.start_jitter_m >= 0.0) {
        return Err(Error::Validation("start_jitter_m must be nonnegative".into()));
    }
    if raw.max_steps == 0 {
        return Err(Error::Validation("max_steps must be positive".into()));
    }

    let workspace = Workspace {
        min: Point::new(raw.workspace.min[0], raw.workspace.min[1]),
        max: Point::new(raw.workspace.max[0], raw.workspace.max[1]),
    };
    if !(workspace.min.x < workspace.max.x && workspace.min.y < workspace.max.y) {
        return Err(Error::Validation("workspace min must be below max".into()));
    }

    let robot_shape = raw.robot.shape.build("robot")?;
    let start = raw.robot.start.state();
    let goal = raw.robot.goal.state();
    for (what, s) in [("start", &start), ("goal", &goal)] {
        if !workspace.contains(&s.position()) {
            return Err(Error::Validation(format!("{what} pose lies outside the workspace")));
        }
    }
    let l = &raw.robot.limits;
    let steer = l.steer_max_deg.to_radians();
    let dsteer = l.dsteer_max_deg.to_radians();
    let limits = MotionLimits {
        u_min: ControlInput::new(l.v_min_mps, -steer),
        u_max: ControlInput::new(l.v_max_mps, steer),
        a_min: ControlInput::new(-l.dv_max_mps, -dsteer),
        a_max: ControlInput::new(l.dv_max_mps, dsteer),
        wheelbase: l.wheelbase_m,
        step,
    };
    limits.validate()?;

    let mut obstacles = Vec::with_capacity(raw.obstacles.len());
    for (i, o) in raw.obstacles.iter().enumerate() {
        let shape = o.shape.build(&format!("obstacle {i}"))?;
        let center = o.center.map_or_else(|| shape.centroid(), |c| Point::new(c[0], c[1]));
        let clearance = min_distance_placed(&robot_shape, &Placement::from_state(&start), &shape)?.distance;
        if clearance <= 0.0 {
            return Err(Error::Validation(format!("obstacle {i} overlaps the start pose")));
        }
        obstacles.push(Obstacle::new(shape, center));
    }

    let mut sensors = Vec::with_capacity(raw.sensors.len());
    let mut ids = BTreeSet::new();
    for s in &raw.sensors {
        let power = match (s.power_w, s.power_dbm) {
            (Some(w), None) => w,
            (None, Some(dbm)) => dbm_to_watts(dbm),
            (None, None) => {
                return Err(Error::Validation(format!("sensor {}: missing power (power_w or power_dbm)", s.id)))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Validation(format!("sensor {}: give only one of power_w and power_dbm", s.id)))
            }
        };
        positive(&format!("sensor {} power", s.id), power)?;
        if !ids.insert(s.id) {
            return Err(Error::Validation(format!("duplicate sensor id {}", s.id)));
        }
        sensors.push(Sensor { id: s.id, position: Point::new(s.position[0], s.position[1]), power });
    }

    let mut regions = Vec::with_capacity(raw.channel.regions.len());
    for (i, r) in raw.channel.regions.iter().enumerate() {
        let what = format!("channel region {i}");
        regions.push(SubRegion { boundary: r.shape.build(&what)?, path_loss: check_path_loss(&what, r.beta, r.alpha)? });
    }
    let channel = ChannelMap {
        regions,
        noise_power: dbm_to_watts(raw.channel.noise_dbm),
        default_region: check_path_loss("default channel region", raw.channel.default.beta, raw.channel.default.alpha)?,
    };

    let mut waypoints = Vec::with_capacity(raw.reference.waypoints.len());
    for (i, w) in raw.reference.waypoints.iter().enumerate() {
        match w.as_slice() {
            [x, y] => waypoints.push((Point::new(*x, *y), None)),
            [x, y, t] => waypoints.push((Point::new(*x, *y), Some(t.to_radians()))),
            _ => return Err(Error::Validation(format!("reference waypoint {i}: expected [x, y] or [x, y, theta_deg]"))),
        }
    }
    let points: Vec<Point> = waypoints.iter().map(|w| w.0).collect();
    let mut reference = ReferencePath::from_points(&points)?;
    if waypoints.iter().any(|w| w.1.is_some()) {
        let states = reference
            .waypoints()
            .iter()
            .zip(&waypoints)
            .map(|(s, w)| RobotState::new(s.x, s.y, w.1.unwrap_or(s.theta)))
            .collect();
        reference = ReferencePath::new(states)?;
    }

    if raw.models.is_empty() {
        return Err(Error::Validation("at least one model is required".into()));
    }
    let mut models = Vec::with_capacity(raw.models.len());
    for m in &raw.models {
        let spec = ModelSpec {
            name: m.name.clone(),
            a: m.a,
            b: m.b,
            historical_samples: m.historical_samples,
            bits_per_sample: m.bits_per_sample,
            sensor_group: m.sensors.iter().copied().collect(),
        };
        spec.validate()?;
        if let Some(id) = spec.sensor_group.iter().find(|id| !ids.contains(id)) {
            return Err(Error::Validation(format!("model {}: sensor {id} is not defined", m.name)));
        }
        models.push(spec);
    }

    raw.planner.validate()?;

    Ok(Scenario {
        name: raw.name,
        version: raw.version,
        workspace,
        robot_shape,
        start,
        goal,
        obstacles,
        sensors,
        channel,
        reference,
        models,
        bandwidth,
        limits,
        planner: raw.planner,
        max_steps: raw.max_steps,
        goal_tolerance,
        start_jitter: raw.start_jitter_m,
    })
}
