//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use datanav::channel::{ChannelMap, PathLoss, Sensor, SubRegion};
use datanav::geometry::{ConvexPolytope, Point};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Convex polygon from 3 to 8 random points in a disk around `center`.
pub fn random_polygon(rng: &mut ChaCha8Rng, center: Point, max_radius: f64) -> ConvexPolytope {
    loop {
        let n = rng.random_range(3..=8);
        let r = rng.random_range(0.3..max_radius);
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let s = rng.random_range(0.2..1.0);
                center + Vector2::new(a.cos(), a.sin()) * (r * s)
            })
            .collect();
        if let Ok(p) = ConvexPolytope::from_vertices(&pts) {
            return p;
        }
    }
}

fn boundary_samples(vertices: &[Point], per_edge: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(vertices.len() * per_edge);
    for (i, a) in vertices.iter().enumerate() {
        let b = vertices[(i + 1) % vertices.len()];
        for k in 0..per_edge {
            out.push(a + (b - a) * (k as f64 / per_edge as f64));
        }
    }
    out
}

/// Point-in-convex-polygon by edge cross products (vertices CCW).
pub fn inside(vertices: &[Point], p: &Point) -> bool {
    (0..vertices.len()).all(|i| {
        let a = vertices[i];
        let b = vertices[(i + 1) % vertices.len()];
        let e = b - a;
        let w = p - a;
        e.x * w.y - e.y * w.x >= -1e-12
    })
}

fn segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let e = b - a;
    let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
    (p - (a + e * t)).norm()
}

fn polygon_distance(p: &Point, vertices: &[Point]) -> f64 {
    (0..vertices.len()).map(|i| segment_distance(p, &vertices[i], &vertices[(i + 1) % vertices.len()])).fold(f64::INFINITY, f64::min)
}

/// Brute force: points sampled along each boundary against the other
/// polygon's edges, zero when any sample lies inside the other polygon.
pub fn sampled_distance(a: &[Point], b: &[Point], per_edge: usize) -> f64 {
    let sa = boundary_samples(a, per_edge);
    let sb = boundary_samples(b, per_edge);
    if sa.iter().any(|p| inside(b, p)) || sb.iter().any(|p| inside(a, p)) {
        return 0.0;
    }
    let ab = sa.iter().map(|p| polygon_distance(p, b)).fold(f64::INFINITY, f64::min);
    let ba = sb.iter().map(|p| polygon_distance(p, a)).fold(f64::INFINITY, f64::min);
    ab.min(ba)
}

/// Random channel map with up to three rectangular regions, plus one sensor.
pub fn random_channel(rng: &mut ChaCha8Rng) -> (ChannelMap, Sensor) {
    let n = rng.random_range(0..=3);
    let regions = (0..n)
        .map(|_| {
            let x0 = rng.random_range(-10.0..5.0);
            let y0 = rng.random_range(-10.0..5.0);
            let w = rng.random_range(2.0..8.0);
            let h = rng.random_range(2.0..8.0);
            let pts = [
                Vector2::new(x0, y0),
                Vector2::new(x0 + w, y0),
                Vector2::new(x0 + w, y0 + h),
                Vector2::new(x0, y0 + h),
            ];
            SubRegion {
                boundary: ConvexPolytope::from_vertices(&pts).unwrap(),
                path_loss: PathLoss { beta: 10f64.powf(rng.random_range(-5.0..-3.0)), alpha: rng.random_range(2.0..5.0) },
            }
        })
        .collect();
    let map = ChannelMap {
        regions,
        noise_power: 1e-10,
        default_region: PathLoss { beta: 10f64.powf(rng.random_range(-5.0..-3.5)), alpha: rng.random_range(2.0..4.0) },
    };
    let sensor = Sensor {
        id: 1,
        position: Vector2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)),
        power: rng.random_range(0.005..0.05),
    };
    (map, sensor)
}

/// Projected gradient for `min 0.5 x'Px + q'x` over a box.
pub fn box_qp_projected_gradient(p: &DMatrix<f64>, q: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    let lipschitz = p.clone().symmetric_eigenvalues().max();
    let step = 1.0 / lipschitz;
    let mut x = DVector::zeros(q.len());
    for _ in 0..200_000 {
        let g = p * &x + q;
        let next = (&x - g * step).zip_zip_map(lo, hi, |v, l, h| v.clamp(l, h));
        let moved = (&next - &x).amax();
        x = next;
        if moved < 1e-14 {
            break;
        }
    }
    x
}
