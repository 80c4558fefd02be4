//! The convexified horizon program solved at each MM iteration.
//!
//! Decision vector `x = [u_0..u_{H-1}, d_0..d_H, tau_0..tau_H]`. States are
//! eliminated through the fixed linearization, `s_h = M_h u + m_h`, so the
//! dynamics hold exactly and every remaining constraint is a sparse row.
//!
//! Collision rows use separating halfspaces computed at the current iterate
//! with the heading frozen there:
//! `n . p_h - offset - r tau_h >= d_h`, `tau_h >= |theta_h - theta_h^n|`,
//! where `r` bounds how far the rotated robot boundary can move per radian.
//! The left side never exceeds the true clearance, so any feasible point is
//! at least `d_h` away from every obstacle.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};

use crate::channel::spectral_efficiency;
use crate::error::{Error, Result};
use crate::geometry::{min_distance_placed, separating_halfspace, Placement};
use crate::kinematics::{ControlInput, LinearizedDynamics, RobotState};
use crate::par;
use crate::surrogate::{SurrogateExpansion, SurrogateTerm};

use super::ipm::{self, IpmOptions, KktResiduals, LinearInequalities, Objective, SparseRow};
use super::{Environment, PlannerConfig, ShapeModel};

/// Variable layout for horizon `H`.
/// Surrogate value, gradient and Hessian in the planar position.
type TermDerivatives = (f64, Vector2<f64>, Matrix2<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub horizon: usize,
}

impl Layout {
    pub fn dim(&self) -> usize {
        2 * self.horizon + 2 * (self.horizon + 1)
    }

    pub fn u(&self, h: usize, j: usize) -> usize {
        2 * h + j
    }

    pub fn d(&self, h: usize) -> usize {
        2 * self.horizon + h
    }

    pub fn tau(&self, h: usize) -> usize {
        3 * self.horizon + 1 + h
    }

    pub fn inputs(&self, x: &DVector<f64>) -> Vec<ControlInput> {
        (0..self.horizon).map(|h| ControlInput::new(x[self.u(h, 0)], x[self.u(h, 1)])).collect()
    }

    pub fn distances(&self, x: &DVector<f64>) -> Vec<f64> {
        (0..=self.horizon).map(|h| x[self.d(h)]).collect()
    }
}

/// `s_h = M_h u + m_h` for `h = 0..=H`.
#[derive(Debug, Clone)]
pub struct StateMap {
    pub m: Vec<DMatrix<f64>>,
    pub offset: Vec<Vector3<f64>>,
}

impl StateMap {
    pub fn new(s0: &Vector3<f64>, lin: &[LinearizedDynamics]) -> Self {
        let nu = 2 * lin.len();
        let mut m = vec![DMatrix::zeros(3, nu)];
        let mut offset = vec![*s0];
        for (h, l) in lin.iter().enumerate() {
            // Zero input relative to the expansion: ref_next - A ref - B u*.
            let base = l.propagate_vector(&Vector3::zeros(), &nalgebra::Vector2::zeros());
            let prev = &m[h];
            let mut next = DMatrix::zeros(3, nu);
            for r in 0..3 {
                for c in 0..2 * h {
                    next[(r, c)] = (0..3).map(|k| l.a[(r, k)] * prev[(k, c)]).sum();
                }
                next[(r, 2 * h)] = l.b[(r, 0)];
                next[(r, 2 * h + 1)] = l.b[(r, 1)];
            }
            offset.push(base + l.a * offset[h]);
            m.push(next);
        }
        Self { m, offset }
    }

    pub fn state(&self, h: usize, x: &DVector<f64>) -> Vector3<f64> {
        let nu = self.m[h].ncols();
        let u = x.rows(0, nu);
        self.offset[h] + &self.m[h] * u
    }

    pub fn states(&self, x: &DVector<f64>) -> Vec<Vector3<f64>> {
        (0..self.m.len()).map(|h| self.state(h, x)).collect()
    }

    /// Row `r` of `M_h` as a sparse row over the first `2h` inputs.
    fn row(&self, h: usize, r: usize, scale: f64, out: &mut SparseRow) {
        for c in 0..2 * h {
            out.push(c, scale * self.m[h][(r, c)]);
        }
    }
}

/// Power `Y^-b`, continued below `y0` by its second-order Taylor expansion
/// so the composition stays finite, convex and decreasing for any `Y`.
#[derive(Debug, Clone, Copy)]
struct ExtendedPower {
    b: f64,
    y0: f64,
}

impl ExtendedPower {
    fn eval(&self, y: f64) -> (f64, f64, f64) {
        let b = self.b;
        let at = |y: f64| (y.powf(-b), -b * y.powf(-b - 1.0), b * (b + 1.0) * y.powf(-b - 2.0));
        if y >= self.y0 {
            return at(y);
        }
        let (f0, f1, f2) = at(self.y0);
        let dy = y - self.y0;
        (f0 + f1 * dy + 0.5 * f2 * dy * dy, f1 + f2 * dy, f2)
    }
}

#[derive(Debug, Clone)]
struct ModelTerm {
    /// `a_e / E`
    coef: f64,
    base: f64,
    /// `B T0 / D_e`
    weight: f64,
    power: ExtendedPower,
    /// Indices into the sensor list.
    sensors: Vec<usize>,
}

/// Objective weights after scheme toggles.
#[derive(Debug, Clone, Copy)]
struct W {
    tracking: f64,
    communication: f64,
    learning: f64,
    safety: f64,
}

/// One convexified horizon program.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub layout: Layout,
    pub states: StateMap,
    /// Unwrapped reference states.
    pub reference: Vec<Vector3<f64>>,
    /// Frozen-region surrogate terms, `[h][k]`.
    pub terms: Vec<Vec<SurrogateTerm>>,
    pub constraints: LinearInequalities,
    models: Vec<ModelTerm>,
    weights: W,
    tracking_hessian: DMatrix<f64>,
}

/// Iterate data the program is built around.
#[derive(Debug, Clone)]
pub struct Expansion {
    /// Unwrapped states of the current iterate, `H + 1` of them.
    pub states: Vec<Vector3<f64>>,
    /// Applied input preceding `u_0`, for the rate limit.
    pub last_input: Option<ControlInput>,
    /// Lower bound for the safety distances.
    pub d_floor: f64,
}

fn surrogate_terms(env: &Environment, states: &[Vector3<f64>]) -> Vec<Vec<SurrogateTerm>> {
    states
        .iter()
        .map(|s| {
            let rs = RobotState::from_vector(s);
            let exp = SurrogateExpansion::new(rs, &env.sensors, &env.channel);
            let region = env.channel.region_at(&rs.position());
            env.sensors.iter().map(|k| exp.term(k, &env.channel, region)).collect()
        })
        .collect()
}

/// Collision-constraint data for step `h` and one obstacle:
/// `normal . p_h - offset - r (tau_h + extra) >= d_h`.
#[derive(Debug, Clone, Copy)]
struct CollisionRow {
    normal: Vector2<f64>,
    offset: f64,
    radius: f64,
    extra: f64,
}

fn collision_rows(env: &Environment, config: &PlannerConfig, exp: &Expansion) -> Vec<Vec<Option<CollisionRow>>> {
    let horizon = exp.states.len() - 1;
    let p0 = exp.states[0].xy();
    let reach_step = env.limits.u_max.v.abs().max(env.limits.u_min.v.abs()) * env.limits.step;
    let robot_radius = env.robot_radius();
    par::map_range(config.exec, env.obstacles.len(), |m| {
        let obs = &env.obstacles[m];
        // Faces give a lower bound on the point-to-obstacle distance.
        let lower = obs
            .shape
            .normals()
            .iter()
            .zip(obs.shape.offsets())
            .map(|(n, h)| n.dot(&p0) - h)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut last_free: Option<usize> = None;
        let mut cache: Vec<Option<CollisionRow>> = Vec::with_capacity(horizon + 1);
        let mut frozen: Vec<Option<(Vector2<f64>, f64)>> = Vec::with_capacity(horizon + 1);
        for h in 0..=horizon {
            let s = &exp.states[h];
            let placement = Placement::new(s.z, s.xy());
            let gap = match env.shape_model {
                ShapeModel::Polytope => lower - robot_radius,
                ShapeModel::PointMass => (p0 - obs.center).norm() - obs.radius - robot_radius,
            };
            let far = gap - reach_step * h as f64 > config.d_max + 1e-6;
            match env.shape_model {
                ShapeModel::PointMass => {
                    frozen.push(None);
                    if far {
                        cache.push(None);
                        continue;
                    }
                    let delta = s.xy() - obs.center;
                    let n = if delta.norm() > 1e-9 {
                        delta / delta.norm()
                    } else {
                        let d = p0 - obs.center;
                        if d.norm() > 1e-9 { d / d.norm() } else { Vector2::new(1.0, 0.0) }
                    };
                    cache.push(Some(CollisionRow {
                        normal: n,
                        offset: n.dot(&obs.center) + robot_radius + obs.radius,
                        radius: 0.0,
                        extra: 0.0,
                    }));
                }
                ShapeModel::Polytope => {
                    let hs = separating_halfspace(&env.robot_shape, &placement, &obs.shape);
                    let free = hs.bound_at(&s.xy()) > 0.0;
                    frozen.push(Some((hs.normal, hs.offset)));
                    if free {
                        last_free = Some(h);
                    }
                    if far {
                        cache.push(None);
                        continue;
                    }
                    let row = if free {
                        CollisionRow { normal: hs.normal, offset: hs.offset, radius: robot_radius, extra: 0.0 }
                    } else {
                        // Borrow the halfspace of the nearest earlier free step;
                        // the heading offset between the two iterates enters as
                        // a constant rotation allowance.
                        let k = last_free.unwrap_or(0);
                        let (normal, offset) = frozen[k].unwrap_or((hs.normal, hs.offset));
                        CollisionRow {
                            normal,
                            offset,
                            radius: robot_radius,
                            extra: (exp.states[k].z - s.z).abs(),
                        }
                    };
                    cache.push(Some(row));
                }
            }
        }
        cache
    })
}

/// Assemble the convex program at the iterate `exp`.
pub fn build_subproblem(
    env: &Environment,
    exp: &Expansion,
    linearization: &[LinearizedDynamics],
    reference: &[Vector3<f64>],
    config: &PlannerConfig,
) -> Result<ConvexProgram> {
    let horizon = linearization.len();
    if exp.states.len() != horizon + 1 || reference.len() != horizon + 1 {
        return Err(Error::LengthMismatch { left: exp.states.len(), right: horizon + 1 });
    }
    let layout = Layout { horizon };
    let states = StateMap::new(&exp.states[0], linearization);
    let limits = &env.limits;
    let mut cons = LinearInequalities::default();
    let unit = |i: usize, v: f64| {
        let mut r = SparseRow::new();
        r.push(i, v);
        r
    };

    // Input box and rate limits.
    for h in 0..horizon {
        let lo = [limits.u_min.v, limits.u_min.psi];
        let hi = [limits.u_max.v, limits.u_max.psi];
        let rate_lo = [limits.a_min.v, limits.a_min.psi];
        let rate_hi = [limits.a_max.v, limits.a_max.psi];
        for j in 0..2 {
            cons.push(unit(layout.u(h, j), 1.0), hi[j]);
            cons.push(unit(layout.u(h, j), -1.0), -lo[j]);
            if h > 0 {
                let mut r = SparseRow::new();
                r.push(layout.u(h, j), 1.0);
                r.push(layout.u(h - 1, j), -1.0);
                cons.push(r.clone(), rate_hi[j]);
                let mut r = SparseRow::new();
                r.push(layout.u(h, j), -1.0);
                r.push(layout.u(h - 1, j), 1.0);
                cons.push(r, -rate_lo[j]);
            } else if let Some(prev) = exp.last_input {
                let p = [prev.v, prev.psi];
                cons.push(unit(layout.u(0, j), 1.0), p[j] + rate_hi[j]);
                cons.push(unit(layout.u(0, j), -1.0), -(p[j] + rate_lo[j]));
            }
        }
    }

    let rows = collision_rows(env, config, exp);
    // The current clearance caps d_0 from below so a slightly tight start
    // does not make the program infeasible.
    let clearance0 = rows
        .iter()
        .filter_map(|r| r[0])
        .map(|r| r.normal.dot(&exp.states[0].xy()) - r.offset)
        .fold(f64::INFINITY, f64::min);
    for h in 0..=horizon {
        let floor = if h == 0 && clearance0 > 0.0 { exp.d_floor.min(0.999 * clearance0) } else { exp.d_floor };
        cons.push(unit(layout.d(h), 1.0), config.d_max);
        cons.push(unit(layout.d(h), -1.0), -floor);
        // tau_h >= |theta_h - theta_h^n|, tau_h <= pi
        let theta_n = exp.states[h].z;
        let mut r = SparseRow::new();
        states.row(h, 2, 1.0, &mut r);
        r.push(layout.tau(h), -1.0);
        cons.push(r, theta_n - states.offset[h].z);
        let mut r = SparseRow::new();
        states.row(h, 2, -1.0, &mut r);
        r.push(layout.tau(h), -1.0);
        cons.push(r, states.offset[h].z - theta_n);
        cons.push(unit(layout.tau(h), 1.0), std::f64::consts::PI);
    }

    for obstacle in &rows {
        for (h, row) in obstacle.iter().enumerate() {
            let Some(row) = row else { continue };
            // -n . (M_h u)_xy + r tau_h + d_h <= n . m_h,xy - offset - r extra
            let mut r = SparseRow::new();
            for c in 0..2 * h {
                r.push(c, -(row.normal.x * states.m[h][(0, c)] + row.normal.y * states.m[h][(1, c)]));
            }
            r.push(layout.tau(h), row.radius);
            r.push(layout.d(h), 1.0);
            let rhs = row.normal.dot(&states.offset[h].xy()) - row.offset - row.radius * row.extra;
            cons.push(r, rhs);
        }
    }

    if let Some(ws) = &env.workspace {
        for h in 1..=horizon {
            for (axis, lo, hi) in [(0, ws.min.x, ws.max.x), (1, ws.min.y, ws.max.y)] {
                let mut r = SparseRow::new();
                states.row(h, axis, 1.0, &mut r);
                cons.push(r, hi - states.offset[h][axis]);
                let mut r = SparseRow::new();
                states.row(h, axis, -1.0, &mut r);
                cons.push(r, states.offset[h][axis] - lo);
            }
        }
    }

    let weights = W {
        tracking: config.weights.tracking,
        communication: config.weights.communication,
        learning: config.weights.learning,
        safety: config.weights.safety,
    };
    let e = env.models.len().max(1) as f64;
    let models = env
        .models
        .iter()
        .map(|spec| ModelTerm {
            coef: spec.a / e,
            base: spec.historical_samples,
            weight: env.bandwidth * limits.step / spec.bits_per_sample,
            power: ExtendedPower {
                b: spec.b,
                y0: if spec.historical_samples > 0.0 { 0.5 * spec.historical_samples } else { 1e-6 },
            },
            sensors: env
                .sensors
                .iter()
                .enumerate()
                .filter(|(_, k)| spec.sensor_group.contains(&k.id))
                .map(|(i, _)| i)
                .collect(),
        })
        .collect();

    let nu = 2 * horizon;
    let mut tracking_hessian = DMatrix::zeros(nu, nu);
    for m in &states.m {
        tracking_hessian += m.transpose() * m * 2.0;
    }

    Ok(ConvexProgram {
        layout,
        terms: surrogate_terms(env, &exp.states),
        states,
        reference: reference.to_vec(),
        constraints: cons,
        models,
        weights,
        tracking_hessian,
    })
}

impl ConvexProgram {
    /// Surrogate values `[h][k]` at the states of `x`.
    pub fn surrogate_values(&self, x: &DVector<f64>) -> Vec<Vec<f64>> {
        self.states
            .states(x)
            .iter()
            .zip(&self.terms)
            .map(|(s, ts)| ts.iter().map(|t| t.value(&s.xy())).collect())
            .collect()
    }

    /// `|| Gamma - Gamma~ ||_2` over all `(k, h)` at `x`.
    pub fn surrogate_gap(&self, x: &DVector<f64>, env: &Environment) -> f64 {
        let states = self.states.states(x);
        let approx = self.surrogate_values(x);
        states
            .iter()
            .zip(&approx)
            .flat_map(|(s, row)| {
                let p = s.xy();
                env.sensors.iter().zip(row).map(move |(k, g)| spectral_efficiency(&p, k, &env.channel) - g)
            })
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }

    fn model_values(&self, gammas: &[Vec<f64>]) -> Vec<f64> {
        self.models
            .iter()
            .map(|mt| mt.base + mt.weight * gammas.iter().map(|row| mt.sensors.iter().map(|&k| row[k]).sum::<f64>()).sum::<f64>())
            .collect()
    }
}

impl Objective for ConvexProgram {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let states = self.states.states(x);
        let c0: f64 = states.iter().zip(&self.reference).map(|(s, r)| (s - r).norm_squared()).sum();
        let gammas = self.surrogate_values(x);
        let total: f64 = gammas.iter().flatten().sum();
        let c2: f64 = self
            .models
            .iter()
            .zip(self.model_values(&gammas))
            .map(|(mt, y)| mt.coef * mt.power.eval(y).0)
            .sum();
        let d: f64 = (0..=self.layout.horizon).map(|h| x[self.layout.d(h)]).sum();
        let w = &self.weights;
        w.tracking * c0 - w.communication * total + w.learning * c2 - w.safety * d
    }

    fn derivatives(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let horizon = self.layout.horizon;
        let nu = 2 * horizon;
        let w = &self.weights;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let states = self.states.states(x);

        // Tracking.
        {
            let mut g = DVector::zeros(nu);
            for (h, (s, r)) in states.iter().zip(&self.reference).enumerate() {
                g += self.states.m[h].transpose() * (s - r) * 2.0;
            }
            grad.rows_mut(0, nu).axpy(w.tracking, &g, 1.0);
            hess.view_mut((0, 0), (nu, nu)).zip_apply(&self.tracking_hessian, |a, b| *a += w.tracking * b);
        }

        // Communication and learning through the surrogate terms.
        let derivs: Vec<Vec<TermDerivatives>> = states
            .iter()
            .zip(&self.terms)
            .map(|(s, ts)| ts.iter().map(|t| t.derivatives(&s.xy())).collect())
            .collect();
        let gammas: Vec<Vec<f64>> = derivs.iter().map(|row| row.iter().map(|d| d.0).collect()).collect();
        let ys = self.model_values(&gammas);
        let powers: Vec<(f64, f64, f64)> = self.models.iter().zip(&ys).map(|(mt, &y)| mt.power.eval(y)).collect();
        let n_sensors = self.terms.first().map_or(0, Vec::len);
        let mut coef = vec![-w.communication; n_sensors];
        for (mt, p) in self.models.iter().zip(&powers) {
            for &k in &mt.sensors {
                coef[k] += w.learning * mt.coef * p.1 * mt.weight;
            }
        }
        let mut model_grads: Vec<DVector<f64>> = vec![DVector::zeros(nu); self.models.len()];
        // Step 0 is fixed by the current state.
        for (h, row) in derivs.iter().enumerate().skip(1) {
            let cols = 2 * h;
            let pm = self.states.m[h].view((0, 0), (2, cols));
            let mut g2 = Vector2::zeros();
            let mut h2 = Matrix2::zeros();
            for (k, d) in row.iter().enumerate() {
                g2 += d.1 * coef[k];
                h2 += d.2 * coef[k];
            }
            let gu = pm.transpose() * g2;
            grad.rows_mut(0, cols).axpy(1.0, &gu, 1.0);
            let hu = pm.transpose() * h2 * pm;
            hess.view_mut((0, 0), (cols, cols)).zip_apply(&hu, |a, b| *a += b);
            for (mt, mg) in self.models.iter().zip(model_grads.iter_mut()) {
                let gk: Vector2<f64> = mt.sensors.iter().map(|&k| row[k].1).sum();
                let gu = pm.transpose() * gk * mt.weight;
                mg.rows_mut(0, cols).axpy(1.0, &gu, 1.0);
            }
        }
        for ((mt, p), mg) in self.models.iter().zip(&powers).zip(&model_grads) {
            let c = w.learning * mt.coef * p.2;
            if c != 0.0 {
                hess.view_mut((0, 0), (nu, nu)).ger(c, mg, mg, 1.0);
            }
        }

        for h in 0..=horizon {
            grad[self.layout.d(h)] = -w.safety;
        }
        (grad, hess)
    }
}

/// Result of one program solve.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x: DVector<f64>,
    pub states: Vec<Vector3<f64>>,
    pub inputs: Vec<ControlInput>,
    pub safety_distances: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub residuals: KktResiduals,
}

/// Solve `program` from `start` to the configured KKT tolerance.
pub fn solve_subproblem(program: &ConvexProgram, start: &DVector<f64>, config: &PlannerConfig) -> Result<SubproblemSolution> {
    let opts = IpmOptions { tolerance: config.kkt_tolerance, max_iterations: 120 };
    let sol = ipm::solve(program, &program.constraints, start, &opts)?;
    if sol.residuals.max() > config.kkt_tolerance * 10.0 {
        return Err(Error::SolverFailure(format!("KKT residuals above tolerance: {:?}", sol.residuals)));
    }
    Ok(SubproblemSolution {
        states: program.states.states(&sol.x),
        inputs: program.layout.inputs(&sol.x),
        safety_distances: program.layout.distances(&sol.x),
        objective: sol.objective,
        iterations: sol.iterations,
        residuals: sol.residuals,
        x: sol.x,
    })
}

/// Exact clearance of the robot at `s` to every obstacle.
pub fn clearances(env: &Environment, s: &Vector3<f64>) -> Result<Vec<f64>> {
    let placement = Placement::new(s.z, s.xy());
    env.obstacles
        .iter()
        .map(|o| min_distance_placed(&env.robot_shape, &placement, &o.shape).map(|c| c.distance))
        .collect()
}
