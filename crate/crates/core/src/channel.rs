//! Region-aware path loss, spectral efficiency and collected data volume.

use serde::{Deserialize, Serialize};

use crate::geometry::{ConvexPolytope, Point};

/// Link distances are clamped below at this value (meters).
pub const DISTANCE_CLAMP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: usize,
    pub position: Point,
    /// Transmit power, watts.
    pub power: f64,
}

/// `(beta, alpha)` of a log-distance model: gain `beta * r^-alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub beta: f64,
    pub alpha: f64,
}

impl PathLoss {
    pub fn gain_at(&self, distance: f64) -> f64 {
        self.beta * clamp_distance(distance).powf(-self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubRegion {
    pub boundary: ConvexPolytope,
    pub path_loss: PathLoss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMap {
    pub regions: Vec<SubRegion>,
    /// Noise power sigma^2, watts.
    pub noise_power: f64,
    /// Used for points outside every region.
    pub default_region: PathLoss,
}

/// Region selection for a query point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionIndex {
    Region(usize),
    Default,
}

pub fn clamp_distance(d: f64) -> f64 {
    d.max(DISTANCE_CLAMP)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ChannelMap {
    /// The lowest-index region containing `pos`, or the default.
    pub fn region_at(&self, pos: &Point) -> RegionIndex {
        self.regions
            .iter()
            .position(|r| r.boundary.contains(pos))
            .map_or(RegionIndex::Default, RegionIndex::Region)
    }

    pub fn path_loss(&self, index: RegionIndex) -> PathLoss {
        match index {
            RegionIndex::Region(l) => self.regions[l].path_loss,
            RegionIndex::Default => self.default_region,
        }
    }

    pub fn path_loss_at(&self, pos: &Point) -> PathLoss {
        self.path_loss(self.region_at(pos))
    }

    /// `p_k / sigma^2`
    pub fn snr_scale(&self, sensor: &Sensor) -> f64 {
        sensor.power / self.noise_power
    }
}

/// Region-aware channel gain between the robot at `pos` and `sensor`.
pub fn channel_gain(pos: &Point, sensor: &Sensor, map: &ChannelMap) -> f64 {
    map.path_loss_at(pos).gain_at((pos - sensor.position).norm())
}

/// `log2(1 + G p / sigma^2)` in bits/s/Hz.
pub fn spectral_efficiency(pos: &Point, sensor: &Sensor, map: &ChannelMap) -> f64 {
    (channel_gain(pos, sensor, map) * map.snr_scale(sensor)).ln_1p() / std::f64::consts::LN_2
}

/// `B T0 sum_h Gamma(p_h)` over the visited positions.
pub fn collected_bits(trajectory: &[Point], sensor: &Sensor, map: &ChannelMap, bandwidth: f64, step: f64) -> f64 {
    bandwidth * step * trajectory.iter().map(|p| spectral_efficiency(p, sensor, map)).sum::<f64>()
}
