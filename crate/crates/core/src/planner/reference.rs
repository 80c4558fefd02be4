//! Local reference extraction from a waypoint polyline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kinematics::{wrap_angle, RobotState};

use super::PlannerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePath {
    waypoints: Vec<RobotState>,
    /// Cumulative arc length at each waypoint.
    arc: Vec<f64>,
}

impl ReferencePath {
    pub fn new(waypoints: Vec<RobotState>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Validation("reference path needs at least 2 waypoints".into()));
        }
        let mut arc = vec![0.0];
        for w in waypoints.windows(2) {
            let len = (w[1].position() - w[0].position()).norm();
            if !(len > 1e-9) {
                return Err(Error::Validation("consecutive reference waypoints coincide".into()));
            }
            arc.push(arc.last().unwrap() + len);
        }
        Ok(Self { waypoints, arc })
    }

    /// Waypoints with headings taken from the outgoing segment direction
    /// (the last waypoint copies the final segment's heading).
    pub fn from_points(points: &[Point]) -> Result<Self> {
        let n = points.len();
        let waypoints = (0..n)
            .map(|i| {
                let (a, b) = if i + 1 < n { (i, i + 1) } else { (n.saturating_sub(2), n - 1) };
                let d = points.get(b).zip(points.get(a)).map(|(b, a)| b - a).unwrap_or_default();
                RobotState::new(points[i].x, points[i].y, d.y.atan2(d.x))
            })
            .collect();
        Self::new(waypoints)
    }

    pub fn waypoints(&self) -> &[RobotState] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Arc length of the closest point on the polyline; ties keep the
    /// lowest segment index.
    pub fn project(&self, p: &Point) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let a = w[0].position();
            let seg = w[1].position() - a;
            let len = seg.norm();
            let t = ((p - a).dot(&seg) / (len * len)).clamp(0.0, 1.0);
            let d = (a + seg * t - p).norm();
            if d < best.0 {
                best = (d, self.arc[i] + t * len);
            }
        }
        best.1
    }

    /// Pose at arc length `s`, clamped to the path ends. The heading is
    /// interpolated between the segment's waypoint headings.
    pub fn pose_at(&self, s: f64) -> RobotState {
        let s = s.clamp(0.0, self.length());
        let i = match self.arc.iter().rposition(|&a| a <= s) {
            Some(i) if i + 1 < self.arc.len() => i,
            _ => self.arc.len() - 2,
        };
        let (a, b) = (&self.waypoints[i], &self.waypoints[i + 1]);
        let t = ((s - self.arc[i]) / (self.arc[i + 1] - self.arc[i])).clamp(0.0, 1.0);
        let theta = a.theta + t * wrap_angle(b.theta - a.theta);
        RobotState::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), theta)
    }
}

/// `H + 1` reference poses starting at the projection of `state`, spaced
/// `reference_speed * step` apart along the path.
pub fn extract_reference(path: &ReferencePath, state: &RobotState, config: &PlannerConfig, step: f64) -> Vec<RobotState> {
    let s0 = path.project(&state.position());
    let ds = config.reference_speed * step;
    (0..=config.horizon).map(|h| path.pose_at(s0 + ds * h as f64)).collect()
}
