//! Planar H-polytopes, rigid placement and minimum distance with dual
//! certificates.
//!
//! A [`ConvexPolytope`] is stored as `{z : G z <= g}` with unit-length face
//! normals, together with its counter-clockwise vertex list which is derived
//! once at construction. Distances are exact closest-feature computations;
//! the dual multipliers `(lambda, mu)` are read off the faces active at the
//! closest points, so the certificate attains the distance exactly.

use nalgebra::{Matrix2, Matrix3, Rotation2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::RobotState;

pub type Point = Vector2<f64>;

const FEASIBILITY_TOL: f64 = 1e-9;
const CONTAINS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolytope {
    normals: Vec<Vector2<f64>>,
    offsets: Vec<f64>,
    vertices: Vec<Point>,
}

impl ConvexPolytope {
    /// Builds `{z : G z <= g}` from face rows. Rows are rescaled to unit
    /// normals so that dual distances come out in meters.
    pub fn from_halfspaces(normals: &[[f64; 2]], offsets: &[f64]) -> Result<Self> {
        if normals.len() != offsets.len() {
            return Err(Error::InvalidPolytope(format!(
                "{} face normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        if normals.len() < 3 {
            return Err(Error::InvalidPolytope("a bounded planar polytope needs at least 3 faces".into()));
        }
        let mut unit = Vec::with_capacity(normals.len());
        let mut offs = Vec::with_capacity(normals.len());
        for (i, (n, &g)) in normals.iter().zip(offsets).enumerate() {
            let v = Vector2::new(n[0], n[1]);
            let len = v.norm();
            if !(len > 1e-12) || !len.is_finite() || !g.is_finite() {
                return Err(Error::InvalidPolytope(format!("face {i} has a zero or non-finite normal")));
            }
            unit.push(v / len);
            offs.push(g / len);
        }
        if !positively_spanning(&unit) {
            return Err(Error::InvalidPolytope("unbounded: face normals leave a recession direction".into()));
        }
        let vertices = enumerate_vertices(&unit, &offs);
        if vertices.len() < 3 || polygon_area(&vertices) <= 1e-12 {
            return Err(Error::InvalidPolytope("empty or without interior".into()));
        }
        Ok(Self { normals: unit, offsets: offs, vertices })
    }

    /// Builds the polytope from a vertex list. The hull is taken, so the
    /// order of the input points does not matter.
    pub fn from_vertices(points: &[Point]) -> Result<Self> {
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidPolytope("non-finite vertex".into()));
        }
        let hull = convex_hull(points);
        if hull.len() < 3 || polygon_area(&hull) <= 1e-12 {
            return Err(Error::InvalidPolytope("vertices are degenerate (fewer than 3 non-collinear points)".into()));
        }
        let mut normals = Vec::with_capacity(hull.len());
        let mut offsets = Vec::with_capacity(hull.len());
        for i in 0..hull.len() {
            let a = hull[i];
            let b = hull[(i + 1) % hull.len()];
            let e = b - a;
            let n = Vector2::new(e.y, -e.x).normalize();
            normals.push(n);
            offsets.push(n.dot(&a));
        }
        Ok(Self { normals, offsets, vertices: hull })
    }

    /// Axis-aligned rectangle centered at the origin.
    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        let (hw, hh) = (0.5 * width, 0.5 * height);
        Self::from_halfspaces(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], &[hw, hh, hw, hh])
    }

    /// Regular polygon with `sides` vertices on a circle of `radius`.
    pub fn regular(sides: usize, radius: f64, phase: f64) -> Result<Self> {
        let pts: Vec<Point> = (0..sides)
            .map(|i| {
                let a = phase + std::f64::consts::TAU * i as f64 / sides as f64;
                Point::new(radius * a.cos(), radius * a.sin())
            })
            .collect();
        Self::from_vertices(&pts)
    }

    pub fn num_faces(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[Vector2<f64>] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Counter-clockwise vertices.
    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Closed-set membership: `G p <= g` with a round-off allowance.
    pub fn contains(&self, p: &Point) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(n, &g)| n.dot(p) <= g + CONTAINS_TOL * (1.0 + g.abs()))
    }

    /// `max_{z in P} dir . z`
    pub fn support(&self, dir: &Vector2<f64>) -> f64 {
        self.vertices.iter().map(|v| dir.dot(v)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let mut c = Point::zeros();
        let mut a2 = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let cr = p.x * q.y - q.x * p.y;
            a2 += cr;
            c += (p + q) * cr;
        }
        c / (3.0 * a2)
    }

    /// Largest vertex distance from `center`.
    pub fn radius_about(&self, center: &Point) -> f64 {
        self.vertices.iter().map(|v| (v - center).norm()).fold(0.0, f64::max)
    }

    /// `{R z + t : z in P}`
    pub fn transformed(&self, placement: &Placement) -> Self {
        let r = placement.rotation;
        let t = placement.translation;
        let normals: Vec<_> = self.normals.iter().map(|n| r * n).collect();
        let offsets = normals.iter().zip(&self.offsets).map(|(n, g)| g + n.dot(&t)).collect();
        let vertices = self.vertices.iter().map(|v| r * v + t).collect();
        Self { normals, offsets, vertices }
    }

    pub fn translated(&self, t: &Vector2<f64>) -> Self {
        self.transformed(&Placement::new(0.0, *t))
    }
}

/// Rigid placement `z -> R(theta) z + p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub rotation: Rotation2<f64>,
    pub translation: Vector2<f64>,
}

impl Placement {
    pub fn new(theta: f64, translation: Vector2<f64>) -> Self {
        Self { rotation: Rotation2::new(theta), translation }
    }

    pub fn identity() -> Self {
        Self::new(0.0, Vector2::zeros())
    }

    pub fn from_state(state: &RobotState) -> Self {
        Self::new(state.theta, Vector2::new(state.x, state.y))
    }

    pub fn rotation_matrix(&self) -> Matrix2<f64> {
        *self.rotation.matrix()
    }

    /// The rotation embedded in 3x3 form with an identity heading block.
    pub fn rotation3(&self) -> Matrix3<f64> {
        let r = self.rotation.matrix();
        Matrix3::new(r[(0, 0)], r[(0, 1)], 0.0, r[(1, 0)], r[(1, 1)], 0.0, 0.0, 0.0, 1.0)
    }
}

/// Region covered by `shape` when the robot is at `state`.
pub fn occupied_region(shape: &ConvexPolytope, state: &RobotState) -> ConvexPolytope {
    shape.transformed(&Placement::from_state(state))
}

/// Dual witness of a distance lower bound between a placed robot shape
/// `{R z + p : G z <= g}` and an obstacle `{y : H y <= h}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCertificate {
    pub distance: f64,
    /// Obstacle face multipliers.
    pub lambda: Vec<f64>,
    /// Robot face multipliers.
    pub mu: Vec<f64>,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateResiduals {
    /// `|lambda^T (H p - h) - mu^T g - slack - d|`
    pub value_gap: f64,
    /// `|| G^T mu + R^T H^T lambda ||`
    pub balance: f64,
    /// `max(0, ||H^T lambda|| - 1)`
    pub cone_excess: f64,
    /// Smallest entry among lambda, mu and slack.
    pub min_multiplier: f64,
}

impl CertificateResiduals {
    pub fn max_residual(&self) -> f64 {
        self.value_gap.max(self.balance).max(self.cone_excess).max((-self.min_multiplier).max(0.0))
    }
}

impl DistanceCertificate {
    fn zero(l_obstacle: usize, l_robot: usize) -> Self {
        Self { distance: 0.0, lambda: vec![0.0; l_obstacle], mu: vec![0.0; l_robot], slack: 0.0 }
    }

    /// `H^T lambda`, the unit separating direction when the sets are apart.
    pub fn direction(&self, obstacle: &ConvexPolytope) -> Vector2<f64> {
        obstacle.normals().iter().zip(&self.lambda).map(|(n, l)| n * *l).sum()
    }

    /// Residuals of the dual system evaluated against a claimed clearance `d`.
    pub fn residuals(
        &self,
        shape: &ConvexPolytope,
        placement: &Placement,
        obstacle: &ConvexPolytope,
        d: f64,
    ) -> CertificateResiduals {
        let ht_lambda = self.direction(obstacle);
        let lambda_h: f64 = self.lambda.iter().zip(obstacle.offsets()).map(|(l, h)| l * h).sum();
        let mu_g: f64 = self.mu.iter().zip(shape.offsets()).map(|(m, g)| m * g).sum();
        let value = ht_lambda.dot(&placement.translation) - lambda_h - mu_g - self.slack;
        let gt_mu: Vector2<f64> = shape.normals().iter().zip(&self.mu).map(|(n, m)| n * *m).sum();
        let balance = gt_mu + placement.rotation.inverse() * ht_lambda;
        let min_multiplier = self
            .lambda
            .iter()
            .chain(&self.mu)
            .copied()
            .chain(std::iter::once(self.slack))
            .fold(f64::INFINITY, f64::min);
        CertificateResiduals {
            value_gap: (value - d).abs(),
            balance: balance.norm(),
            cone_excess: (ht_lambda.norm() - 1.0).max(0.0),
            min_multiplier,
        }
    }
}

/// Minimum Euclidean distance between two world-frame polytopes; `a` plays
/// the robot role (multipliers `mu`) and `b` the obstacle role (`lambda`).
pub fn min_distance(a: &ConvexPolytope, b: &ConvexPolytope) -> Result<DistanceCertificate> {
    min_distance_placed(a, &Placement::identity(), b)
}

/// Minimum distance between `shape` placed by `placement` and `obstacle`,
/// with a certificate expressed against the shape's local `(G, g)`.
pub fn min_distance_placed(
    shape: &ConvexPolytope,
    placement: &Placement,
    obstacle: &ConvexPolytope,
) -> Result<DistanceCertificate> {
    let world = shape.transformed(placement);
    let Some(closest) = closest_points(world.vertices(), obstacle.vertices()) else {
        return Ok(DistanceCertificate::zero(obstacle.num_faces(), shape.num_faces()));
    };
    let n = (closest.on_a - closest.on_b) / closest.distance;
    let lambda = active_face_multipliers(obstacle, &closest.on_b, &n).ok_or_else(|| {
        Error::SolverFailure("no nonnegative obstacle multipliers reproduce the separating direction".into())
    })?;
    let local_point = placement.rotation.inverse() * (closest.on_a - placement.translation);
    let local_dir = -(placement.rotation.inverse() * n);
    let mu = active_face_multipliers(shape, &local_point, &local_dir).ok_or_else(|| {
        Error::SolverFailure("no nonnegative robot multipliers reproduce the separating direction".into())
    })?;
    Ok(DistanceCertificate { distance: closest.distance, lambda, mu, slack: 0.0 })
}

/// Affine lower bound `normal . p - offset` on the distance between the
/// robot at position `p` (heading frozen at the placement's) and an obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatingHalfspace {
    pub normal: Vector2<f64>,
    pub offset: f64,
}

impl SeparatingHalfspace {
    pub fn bound_at(&self, p: &Point) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Tightest edge-normal or closest-point halfspace for the current
/// placement. When the sets overlap the bound is the negated penetration
/// depth along the best separating axis.
pub fn separating_halfspace(
    shape: &ConvexPolytope,
    placement: &Placement,
    obstacle: &ConvexPolytope,
) -> SeparatingHalfspace {
    let world = shape.transformed(placement);
    let normal = match closest_points(world.vertices(), obstacle.vertices()) {
        Some(c) => (c.on_a - c.on_b) / c.distance,
        None => best_axis(&world, obstacle).0,
    };
    let local_dir = -(placement.rotation.inverse() * normal);
    let offset = obstacle.support(&normal) + shape.support(&local_dir);
    SeparatingHalfspace { normal, offset }
}

/// Separating-axis search over both polygons' edge normals. Returns the
/// axis (pointing from `b` towards `a`) with the largest separation and
/// that separation (negative when the sets overlap).
pub fn best_axis(a: &ConvexPolytope, b: &ConvexPolytope) -> (Vector2<f64>, f64) {
    let mut best = (Vector2::new(1.0, 0.0), f64::NEG_INFINITY);
    for n in b.normals().iter().copied().chain(a.normals().iter().map(|n| -n)) {
        let sep = -a.support(&-n) - b.support(&n);
        if sep > best.1 {
            best = (n, sep);
        }
    }
    best
}

struct Closest {
    distance: f64,
    on_a: Point,
    on_b: Point,
}

/// Closest points of two disjoint convex polygons, `None` when they touch
/// or overlap.
fn closest_points(a: &[Point], b: &[Point]) -> Option<Closest> {
    if !disjoint(a, b) {
        return None;
    }
    let mut best = Closest { distance: f64::INFINITY, on_a: a[0], on_b: b[0] };
    for (pts, edges, flip) in [(a, b, false), (b, a, true)] {
        for p in pts {
            for i in 0..edges.len() {
                let q = closest_on_segment(p, &edges[i], &edges[(i + 1) % edges.len()]);
                let d = (p - q).norm();
                if d < best.distance {
                    best = if flip {
                        Closest { distance: d, on_a: q, on_b: *p }
                    } else {
                        Closest { distance: d, on_a: *p, on_b: q }
                    };
                }
            }
        }
    }
    if best.distance > 0.0 {
        Some(best)
    } else {
        None
    }
}

fn disjoint(a: &[Point], b: &[Point]) -> bool {
    for (pa, pb) in [(a, b), (b, a)] {
        for i in 0..pa.len() {
            let e = pa[(i + 1) % pa.len()] - pa[i];
            let n = Vector2::new(e.y, -e.x);
            let max_a = pa.iter().map(|v| n.dot(v)).fold(f64::NEG_INFINITY, f64::max);
            let min_b = pb.iter().map(|v| n.dot(v)).fold(f64::INFINITY, f64::min);
            if min_b > max_a {
                return true;
            }
        }
    }
    false
}

fn closest_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let e = b - a;
    let len2 = e.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&e) / len2).clamp(0.0, 1.0);
    a + e * t
}

/// Nonnegative multipliers on the faces active at `point` whose weighted
/// normals reproduce `dir`.
fn active_face_multipliers(poly: &ConvexPolytope, point: &Point, dir: &Vector2<f64>) -> Option<Vec<f64>> {
    let scale = 1.0 + point.norm();
    let active: Vec<usize> = (0..poly.num_faces())
        .filter(|&i| (poly.normals[i].dot(point) - poly.offsets[i]).abs() <= 1e-7 * scale)
        .collect();
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut consider = |terms: Vec<(usize, f64)>| {
        let recon: Vector2<f64> = terms.iter().map(|&(i, l)| poly.normals[i] * l).sum();
        let res = (recon - dir).norm();
        if best.as_ref().is_none_or(|(r, _)| res < *r) {
            best = Some((res, terms));
        }
    };
    for &i in &active {
        consider(vec![(i, poly.normals[i].dot(dir).max(0.0))]);
    }
    for (k, &i) in active.iter().enumerate() {
        for &j in &active[k + 1..] {
            let m = Matrix2::from_columns(&[poly.normals[i], poly.normals[j]]);
            if let Some(inv) = m.try_inverse() {
                let l = inv * dir;
                if l.x >= -1e-9 && l.y >= -1e-9 {
                    consider(vec![(i, l.x.max(0.0)), (j, l.y.max(0.0))]);
                }
            }
        }
    }
    let (res, terms) = best?;
    if res > 1e-6 {
        return None;
    }
    let mut out = vec![0.0; poly.num_faces()];
    for (i, l) in terms {
        out[i] = l;
    }
    Some(out)
}

fn positively_spanning(normals: &[Vector2<f64>]) -> bool {
    let mut angles: Vec<f64> = normals.iter().map(|n| n.y.atan2(n.x)).collect();
    angles.sort_by(f64::total_cmp);
    let mut max_gap = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap < std::f64::consts::PI - 1e-12
}

fn enumerate_vertices(normals: &[Vector2<f64>], offsets: &[f64]) -> Vec<Point> {
    let scale = 1.0 + offsets.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut pts = Vec::new();
    for i in 0..normals.len() {
        for j in i + 1..normals.len() {
            let m = Matrix2::from_rows(&[normals[i].transpose(), normals[j].transpose()]);
            if m.determinant().abs() < 1e-12 {
                continue;
            }
            let Some(inv) = m.try_inverse() else { continue };
            let p = inv * Vector2::new(offsets[i], offsets[j]);
            if normals.iter().zip(offsets).all(|(n, g)| n.dot(&p) <= g + FEASIBILITY_TOL * scale) {
                pts.push(p);
            }
        }
    }
    convex_hull(&pts)
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() <= 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Point, a: &Point, b: &Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for (pass, floor) in [(pts.iter().collect::<Vec<_>>(), 2), (pts.iter().rev().skip(1).collect(), 0)] {
        // The upper chain must not pop into the finished lower chain.
        let floor = if floor == 0 { hull.len() + 1 } else { floor };
        for p in pass {
            while hull.len() >= floor && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 1e-14 {
                hull.pop();
            }
            hull.push(*p);
        }
    }
    hull.pop();
    hull
}

fn polygon_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn unit_square() -> ConvexPolytope {
        ConvexPolytope::rectangle(1.0, 1.0).unwrap()
    }

    fn state(x: f64, y: f64, theta: f64) -> RobotState {
        RobotState::new(x, y, theta)
    }

    #[test]
    fn rejects_bad_polytopes() {
        // half-plane only
        assert!(ConvexPolytope::from_halfspaces(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], &[1.0, 1.0, 1.0]).is_err());
        // empty
        assert!(ConvexPolytope::from_halfspaces(
            &[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            &[-1.0, -1.0, 1.0, 1.0]
        )
        .is_err());
        // zero row
        assert!(ConvexPolytope::from_halfspaces(
            &[[0.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            &[1.0, 1.0, 1.0, 1.0]
        )
        .is_err());
        assert!(ConvexPolytope::from_vertices(&[Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)]).is_err());
    }

    #[test]
    fn normals_are_normalized() {
        let p = ConvexPolytope::from_halfspaces(
            &[[2.0, 0.0], [0.0, 3.0], [-4.0, 0.0], [0.0, -1.0]],
            &[2.0, 3.0, 4.0, 1.0],
        )
        .unwrap();
        for (n, g) in p.normals().iter().zip(p.offsets()) {
            assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-15);
            assert_relative_eq!(*g, 1.0, epsilon = 1e-15);
        }
        assert_relative_eq!(p.area(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn redundant_faces_are_tolerated() {
        let p = ConvexPolytope::from_halfspaces(
            &[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]],
            &[1.0, 1.0, 1.0, 1.0, 10.0],
        )
        .unwrap();
        assert_eq!(p.vertices().len(), 4);
    }

    #[test]
    fn identity_and_translation_placement() {
        let sq = unit_square();
        let same = occupied_region(&sq, &state(0.0, 0.0, 0.0));
        for (a, b) in same.vertices().iter().zip(sq.vertices()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        let moved = occupied_region(&sq, &state(2.0, 0.0, 0.0));
        assert_relative_eq!(moved.centroid(), Point::new(2.0, 0.0), epsilon = 1e-12);
        assert!(moved.contains(&Point::new(2.4, 0.4)));
        assert!(!moved.contains(&Point::new(1.4, 0.0)));
    }

    #[test]
    fn rotated_placement_matches_vertex_transform() {
        // Asymmetric shape so that a quarter turn is observable.
        let local = [Point::new(-0.5, -0.2), Point::new(0.7, -0.2), Point::new(0.7, 0.3), Point::new(-0.5, 0.3)];
        let shape = ConvexPolytope::from_vertices(&local).unwrap();
        let placed = occupied_region(&shape, &state(0.0, 0.0, FRAC_PI_2));
        // (x, y) -> (-y, x), then rebuild an H-form independently.
        let rotated: Vec<Point> = local.iter().map(|v| Point::new(-v.y, v.x)).collect();
        let expected = ConvexPolytope::from_vertices(&rotated).unwrap();
        for v in expected.vertices() {
            assert!(placed.vertices().iter().any(|w| (w - v).norm() < 1e-12));
            assert!(placed.contains(v));
        }
        for v in placed.vertices() {
            assert!(expected.contains(v));
        }
    }

    #[test]
    fn square_gap_distance() {
        let a = unit_square();
        let b = unit_square().translated(&Vector2::new(3.0, 0.0));
        let c = min_distance(&a, &b).unwrap();
        assert_relative_eq!(c.distance, 2.0, epsilon = 1e-12);
        let r = c.residuals(&a, &Placement::identity(), &b, 2.0);
        assert!(r.max_residual() < 1e-12, "{r:?}");
    }

    #[test]
    fn overlapping_squares_have_zero_distance() {
        let a = unit_square();
        let b = unit_square().translated(&Vector2::new(0.5, 0.0));
        let c = min_distance(&a, &b).unwrap();
        assert_eq!(c.distance, 0.0);
        assert!(c.residuals(&a, &Placement::identity(), &b, 0.0).max_residual() == 0.0);
    }

    #[test]
    fn vertex_to_vertex_certificate() {
        let a = unit_square();
        let b = ConvexPolytope::regular(4, 0.5, 0.0).unwrap().translated(&Vector2::new(2.0, 2.0));
        let placement = Placement::new(0.3, Vector2::new(0.1, -0.2));
        let c = min_distance_placed(&a, &placement, &b).unwrap();
        let r = c.residuals(&a, &placement, &b, c.distance);
        assert!(r.max_residual() < 1e-9, "{r:?}");
        assert!(c.distance > 0.5);
    }

    #[test]
    fn contains_is_closed() {
        let sq = unit_square();
        assert!(sq.contains(&Point::new(0.0, 0.0)));
        assert!(!sq.contains(&Point::new(5.0, 5.0)));
        assert!(sq.contains(&Point::new(0.5, 0.0)));
    }

    #[test]
    fn halfspace_is_tight_and_conservative() {
        let shape = ConvexPolytope::rectangle(0.8, 0.4).unwrap();
        let obs = ConvexPolytope::regular(5, 0.6, 0.2).unwrap().translated(&Vector2::new(2.0, 0.5));
        let pl = Placement::new(0.4, Vector2::new(0.0, 0.0));
        let hs = separating_halfspace(&shape, &pl, &obs);
        let d = min_distance_placed(&shape, &pl, &obs).unwrap().distance;
        assert_relative_eq!(hs.bound_at(&pl.translation), d, epsilon = 1e-12);
        for k in 0..50 {
            let p = Vector2::new(-1.0 + 0.05 * k as f64, 0.3 * (k as f64).sin());
            let moved = Placement::new(0.4, p);
            let dist = min_distance_placed(&shape, &moved, &obs).unwrap().distance;
            assert!(hs.bound_at(&p) <= dist + 1e-12);
        }
        // Overlap gives a negative bound along the best axis.
        let inside = Placement::new(0.0, Vector2::new(2.0, 0.5));
        let hs = separating_halfspace(&shape, &inside, &obs);
        assert!(hs.bound_at(&inside.translation) < 0.0);
    }
}
