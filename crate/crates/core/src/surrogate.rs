//! Concave lower bound of the spectral efficiency used by the MM loop.
//!
//! Around an expansion point `s*` at clamped distance `r*` from sensor `c`,
//! with `q = r*^-alpha` and `K = beta p / sigma^2`,
//!
//! ```text
//! Gamma~(p) = phi(K (2 q - q^2 r(p)^alpha)),   r(p) = max(|p - c|, d_eps)
//! ```
//!
//! The bracket follows from `1/x >= 2/y - x/y^2` with `x = r^alpha`,
//! `y = r*^alpha`, so `Gamma~ <= Gamma` and both agree in value and gradient
//! at `s*`. `phi(t) = log2(1 + t)` for `t >= 0` and continues linearly with
//! slope `1 / ln 2` below zero. The continuation keeps `phi` concave and
//! nondecreasing, so `Gamma~` is concave in `p` whenever `alpha >= 1` (or
//! `alpha = 0`), and since it is negative there it never exceeds `Gamma >= 0`.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::channel::{clamp_distance, spectral_efficiency, ChannelMap, PathLoss, RegionIndex, Sensor, DISTANCE_CLAMP};
use crate::geometry::Point;
use crate::kinematics::RobotState;

/// `phi(t)` and its first two derivatives.
fn phi(t: f64) -> (f64, f64, f64) {
    if t >= 0.0 {
        let d = 1.0 / ((1.0 + t) * LN_2);
        (t.ln_1p() / LN_2, d, -d / (1.0 + t))
    } else {
        (t / LN_2, 1.0 / LN_2, 0.0)
    }
}

/// One sensor's surrogate with the region (and so `beta`, `alpha`) fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateTerm {
    pub center: Point,
    pub scale: f64,
    pub alpha: f64,
    /// `r*^-alpha`
    pub q: f64,
    /// `r*^-2 alpha`
    pub q2: f64,
}

impl SurrogateTerm {
    pub fn new(expansion: &Point, sensor: &Sensor, path_loss: PathLoss, map: &ChannelMap) -> Self {
        let r = clamp_distance((expansion - sensor.position).norm());
        let q = r.powf(-path_loss.alpha);
        Self {
            center: sensor.position,
            scale: path_loss.beta * map.snr_scale(sensor),
            alpha: path_loss.alpha,
            q,
            q2: q * q,
        }
    }

    fn rho(&self, p: &Point) -> f64 {
        clamp_distance((p - self.center).norm()).powf(self.alpha)
    }

    fn inner(&self, p: &Point) -> f64 {
        self.scale * (2.0 * self.q - self.q2 * self.rho(p))
    }

    pub fn value(&self, p: &Point) -> f64 {
        phi(self.inner(p)).0
    }

    /// Value, gradient and Hessian with respect to the planar position.
    pub fn derivatives(&self, p: &Point) -> (f64, Vector2<f64>, Matrix2<f64>) {
        let delta = p - self.center;
        let r = delta.norm();
        let (f, d1, d2) = phi(self.inner(p));
        if r <= DISTANCE_CLAMP || self.alpha == 0.0 {
            return (f, Vector2::zeros(), Matrix2::zeros());
        }
        let a = self.alpha;
        let ra2 = r.powf(a - 2.0);
        let grad_rho = delta * (a * ra2);
        let hess_rho = Matrix2::identity() * (a * ra2) + delta * delta.transpose() * (a * (a - 2.0) * ra2 / (r * r));
        let c = -self.scale * self.q2;
        let grad_inner = grad_rho * c;
        let hess_inner = hess_rho * c;
        (f, grad_inner * d1, grad_inner * grad_inner.transpose() * d2 + hess_inner * d1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorAnchor {
    pub sensor_id: usize,
    pub anchor: Point,
    /// Clamped distance from the expansion point to the sensor.
    pub anchor_distance: f64,
    /// `(q, q^2)` per region, indexed like the map's regions with the
    /// default region last.
    pub coefficients: Vec<(f64, f64)>,
}

/// Snapshot of the cached surrogate coefficients at an expansion state.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateExpansion {
    pub expansion_state: RobotState,
    pub anchors: Vec<SensorAnchor>,
}

impl SurrogateExpansion {
    pub fn new(expansion_state: RobotState, sensors: &[Sensor], map: &ChannelMap) -> Self {
        let pos = expansion_state.position();
        let anchors = sensors
            .iter()
            .map(|s| {
                let r = clamp_distance((pos - s.position).norm());
                let coefficients = map
                    .regions
                    .iter()
                    .map(|reg| reg.path_loss.alpha)
                    .chain(std::iter::once(map.default_region.alpha))
                    .map(|alpha| {
                        let q = r.powf(-alpha);
                        (q, q * q)
                    })
                    .collect();
                SensorAnchor { sensor_id: s.id, anchor: s.position, anchor_distance: r, coefficients }
            })
            .collect();
        Self { expansion_state, anchors }
    }

    pub fn anchor(&self, sensor_id: usize) -> Option<&SensorAnchor> {
        self.anchors.iter().find(|a| a.sensor_id == sensor_id)
    }

    /// The fixed-region term for `sensor` in `region`.
    pub fn term(&self, sensor: &Sensor, map: &ChannelMap, region: RegionIndex) -> SurrogateTerm {
        let anchor = self.anchor(sensor.id).expect("expansion built for this sensor set");
        let slot = match region {
            RegionIndex::Region(l) => l,
            RegionIndex::Default => map.regions.len(),
        };
        let (q, q2) = anchor.coefficients[slot];
        let pl = map.path_loss(region);
        SurrogateTerm { center: sensor.position, scale: pl.beta * map.snr_scale(sensor), alpha: pl.alpha, q, q2 }
    }
}

/// Surrogate spectral efficiency at `pos`, with the region resolved by the map.
pub fn surrogate_se(pos: &Point, sensor: &Sensor, map: &ChannelMap, exp: &SurrogateExpansion) -> f64 {
    exp.term(sensor, map, map.region_at(pos)).value(pos)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub sensor_id: usize,
    pub expansion: [f64; 2],
    pub samples: usize,
    /// `max (Gamma~ - Gamma)` over sampled points.
    pub max_lower_bound_violation: f64,
    /// `|Gamma~(s*) - Gamma(s*)|`
    pub value_mismatch: f64,
    /// Relative gradient mismatch at `s*` against central differences of `Gamma`.
    pub gradient_relative_error: f64,
    /// `max ((f(p) + f(q)) / 2 - f((p + q) / 2))` over sampled pairs.
    pub max_concavity_violation: f64,
    pub concavity_pairs: usize,
    pub lower_bound_ok: bool,
    pub consistency_ok: bool,
    pub concavity_ok: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.lower_bound_ok && self.consistency_ok && self.concavity_ok
    }
}

pub const LOWER_BOUND_TOL: f64 = 1e-9;
pub const VALUE_TOL: f64 = 1e-12;
pub const GRADIENT_TOL: f64 = 1e-4;
pub const CONCAVITY_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-5;

fn central_gradient(f: impl Fn(&Point) -> f64, p: &Point) -> Vector2<f64> {
    let ex = Vector2::new(FD_STEP, 0.0);
    let ey = Vector2::new(0.0, FD_STEP);
    Vector2::new((f(&(p + ex)) - f(&(p - ex))) / (2.0 * FD_STEP), (f(&(p + ey)) - f(&(p - ey))) / (2.0 * FD_STEP))
}

/// Central differences, except next to the distance clamp where the
/// radial kink would sit inside the stencil; there each axis uses a
/// second-order one-sided difference on the side moving away from `center`.
fn stencil_gradient(f: impl Fn(&Point) -> f64, p: &Point, center: &Point) -> Vector2<f64> {
    let offset = p - center;
    if (offset.norm() - DISTANCE_CLAMP).abs() >= 2.0 * FD_STEP {
        return central_gradient(f, p);
    }
    let central = central_gradient(&f, p);
    let mut g = Vector2::zeros();
    for i in 0..2 {
        if offset[i].abs() <= 1e-12 {
            g[i] = central[i];
            continue;
        }
        let sign = offset[i].signum();
        let mut e = Vector2::zeros();
        e[i] = sign * FD_STEP;
        g[i] = sign * (-3.0 * f(p) + 4.0 * f(&(p + e)) - f(&(p + e * 2.0))) / (2.0 * FD_STEP);
    }
    g
}

/// Checks the lower-bound, concavity and local-consistency conditions of
/// the surrogate by sampling points in the expansion point's region.
pub fn validate_surrogate(exp: &SurrogateExpansion, sensor: &Sensor, map: &ChannelMap, samples: usize) -> ValidationReport {
    validate_surrogate_seeded(exp, sensor, map, samples, 0x5eed)
}

pub fn validate_surrogate_seeded(
    exp: &SurrogateExpansion,
    sensor: &Sensor,
    map: &ChannelMap,
    samples: usize,
    seed: u64,
) -> ValidationReport {
    let samples = samples.max(2);
    let star = exp.expansion_state.position();
    let region = map.region_at(&star);
    let truth = |p: &Point| spectral_efficiency(p, sensor, map);
    let surr = |p: &Point| surrogate_se(p, sensor, map, exp);

    let value_mismatch = (surr(&star) - truth(&star)).abs();
    let fd_true = stencil_gradient(truth, &star, &sensor.position);
    let fd_surr = stencil_gradient(surr, &star, &sensor.position);
    let denom = fd_true.norm().max(1e-8);
    let mut gradient_relative_error = (fd_surr - fd_true).norm() / denom;
    let r_star = (star - sensor.position).norm();
    if r_star > DISTANCE_CLAMP + 2.0 * FD_STEP {
        let (_, g, _) = exp.term(sensor, map, region).derivatives(&star);
        gradient_relative_error = gradient_relative_error.max((g - fd_true).norm() / denom);
    }

    // Sample inside the expansion region, limited to a disk around s*.
    let radius = (3.0 * r_star).max(5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Point {
        for _ in 0..10_000 {
            let p = star + Vector2::new(rng.random_range(-radius..radius), rng.random_range(-radius..radius));
            if (p - star).norm() <= radius && map.region_at(&p) == region {
                return p;
            }
        }
        star
    };
    let points: Vec<Point> = (0..samples).map(|_| draw(&mut rng)).collect();
    let max_lower_bound_violation = points.iter().map(|p| surr(p) - truth(p)).fold(f64::NEG_INFINITY, f64::max);

    let mut max_concavity_violation = f64::NEG_INFINITY;
    let mut concavity_pairs = 0;
    for i in 0..samples {
        let p = points[i];
        let q = points[(i * 7 + 3) % samples];
        let mid = (p + q) * 0.5;
        if map.region_at(&mid) != region {
            continue;
        }
        concavity_pairs += 1;
        let gap = 0.5 * (surr(&p) + surr(&q)) - surr(&mid);
        max_concavity_violation = max_concavity_violation.max(gap);
    }

    ValidationReport {
        sensor_id: sensor.id,
        expansion: [star.x, star.y],
        samples,
        max_lower_bound_violation,
        value_mismatch,
        gradient_relative_error,
        max_concavity_violation,
        concavity_pairs,
        lower_bound_ok: max_lower_bound_violation <= LOWER_BOUND_TOL,
        consistency_ok: value_mismatch <= VALUE_TOL * (1.0 + truth(&star)) && gradient_relative_error <= GRADIENT_TOL,
        concavity_ok: max_concavity_violation <= CONCAVITY_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SubRegion;
    use crate::geometry::ConvexPolytope;
    use approx::assert_relative_eq;

    fn map(alpha: f64) -> ChannelMap {
        ChannelMap {
            regions: vec![SubRegion {
                boundary: ConvexPolytope::rectangle(40.0, 40.0).unwrap(),
                path_loss: PathLoss { beta: 1e-4, alpha },
            }],
            noise_power: 1e-10,
            default_region: PathLoss { beta: 3e-5, alpha: 3.5 },
        }
    }

    fn sensor() -> Sensor {
        Sensor { id: 1, position: Point::new(1.0, -2.0), power: 0.02 }
    }

    #[test]
    fn touches_at_expansion() {
        let m = map(2.0);
        let s = sensor();
        let st = RobotState::new(4.0, 1.0, 0.3);
        let exp = SurrogateExpansion::new(st, std::slice::from_ref(&s), &m);
        let p = st.position();
        assert_relative_eq!(surrogate_se(&p, &s, &m, &exp), spectral_efficiency(&p, &s, &m), max_relative = 1e-14);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let m = map(2.7);
        let s = sensor();
        let exp = SurrogateExpansion::new(RobotState::new(4.0, 1.0, 0.0), std::slice::from_ref(&s), &m);
        let term = exp.term(&s, &m, RegionIndex::Region(0));
        for p in [Point::new(3.0, 0.5), Point::new(5.5, 2.0), Point::new(9.0, 6.0)] {
            let (_, g, h) = term.derivatives(&p);
            let fd = central_gradient(|x| term.value(x), &p);
            assert!((g - fd).norm() <= 1e-5 * (1.0 + g.norm()), "{g} vs {fd}");
            let e = 1e-5;
            let col0 = (term.derivatives(&(p + Vector2::new(e, 0.0))).1 - term.derivatives(&(p - Vector2::new(e, 0.0))).1) / (2.0 * e);
            assert!((h.column(0) - col0).norm() <= 1e-4 * (1.0 + h.norm()));
            assert!(h.symmetric_eigenvalues().max() <= 1e-9);
        }
    }

    #[test]
    fn validator_passes_far_and_at_clamp() {
        let m = map(2.0);
        let s = sensor();
        let far = SurrogateExpansion::new(RobotState::new(6.0, 3.0, 0.0), std::slice::from_ref(&s), &m);
        let rep = validate_surrogate(&far, &s, &m, 500);
        assert!(rep.passed(), "{rep:?}");
        let at_clamp = SurrogateExpansion::new(RobotState::new(1.1, -2.0, 0.0), std::slice::from_ref(&s), &m);
        let rep = validate_surrogate(&at_clamp, &s, &m, 500);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn constant_gain_region_is_exact() {
        let m = map(0.0);
        let s = sensor();
        let exp = SurrogateExpansion::new(RobotState::new(6.0, 3.0, 0.0), std::slice::from_ref(&s), &m);
        for p in [Point::new(0.0, 0.0), Point::new(-10.0, 12.0), Point::new(1.0, -2.0)] {
            assert_relative_eq!(surrogate_se(&p, &s, &m, &exp), spectral_efficiency(&p, &s, &m), max_relative = 1e-14);
        }
    }

    #[test]
    fn negative_bracket_continues_linearly() {
        let m = map(2.0);
        let s = sensor();
        let exp = SurrogateExpansion::new(RobotState::new(2.0, -2.0, 0.0), std::slice::from_ref(&s), &m);
        let p = Point::new(15.0, -2.0);
        let v = surrogate_se(&p, &s, &m, &exp);
        assert!(v < 0.0);
        assert!(v <= spectral_efficiency(&p, &s, &m));
    }
}
