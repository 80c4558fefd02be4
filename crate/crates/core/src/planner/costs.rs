//! Objective terms evaluated on concrete trajectories.

use crate::channel::{spectral_efficiency, ChannelMap, Sensor};
use crate::error::{Error, Result};
use crate::kinematics::{wrap_angle, RobotState};
use crate::learning::ModelSpec;

/// Sum of squared state deviations; heading differences are wrapped.
pub fn cost_tracking(states: &[RobotState], reference: &[RobotState]) -> Result<f64> {
    if states.len() != reference.len() {
        return Err(Error::LengthMismatch { left: states.len(), right: reference.len() });
    }
    Ok(states
        .iter()
        .zip(reference)
        .map(|(s, r)| (s.x - r.x).powi(2) + (s.y - r.y).powi(2) + wrap_angle(s.theta - r.theta).powi(2))
        .sum())
}

/// Negated total spectral efficiency over states and sensors.
pub fn cost_communication(states: &[RobotState], sensors: &[Sensor], map: &ChannelMap) -> f64 {
    -states
        .iter()
        .map(|s| {
            let p = s.position();
            sensors.iter().map(|k| spectral_efficiency(&p, k, map)).sum::<f64>()
        })
        .sum::<f64>()
}

/// Per-sensor spectral efficiency summed over the states, in sensor order.
pub fn efficiency_sums(states: &[RobotState], sensors: &[Sensor], map: &ChannelMap) -> Vec<f64> {
    sensors
        .iter()
        .map(|k| states.iter().map(|s| spectral_efficiency(&s.position(), k, map)).sum())
        .collect()
}

/// Mean over models of `a (A + B T0 sum Gamma / D)^-b` using the given
/// per-sensor efficiency sums.
pub fn learning_from_sums(sums: &[f64], sensors: &[Sensor], specs: &[ModelSpec], bandwidth: f64, step: f64) -> f64 {
    let e = specs.len() as f64;
    specs
        .iter()
        .map(|spec| {
            let gamma: f64 = sensors
                .iter()
                .zip(sums)
                .filter(|(k, _)| spec.sensor_group.contains(&k.id))
                .map(|(_, g)| g)
                .sum();
            let y = spec.historical_samples + bandwidth * step * gamma / spec.bits_per_sample;
            spec.a / e * y.powf(-spec.b)
        })
        .sum()
}

/// Mean predicted classification error after collecting along `states`.
pub fn cost_learning(
    states: &[RobotState],
    sensors: &[Sensor],
    map: &ChannelMap,
    specs: &[ModelSpec],
    bandwidth: f64,
    step: f64,
) -> f64 {
    learning_from_sums(&efficiency_sums(states, sensors, map), sensors, specs, bandwidth, step)
}

/// `-sum d`, with every distance required inside `[d_min, d_max]`.
pub fn cost_safety(distances: &[f64], d_min: f64, d_max: f64) -> Result<f64> {
    let tol = 1e-9 * (1.0 + d_max.abs());
    for &d in distances {
        if !(d >= d_min - tol && d <= d_max + tol) {
            return Err(Error::OutOfBounds { value: d, lo: d_min, hi: d_max });
        }
    }
    Ok(-distances.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{PathLoss, SubRegion};
    use crate::geometry::{ConvexPolytope, Point};
    use approx::assert_relative_eq;

    fn map() -> ChannelMap {
        ChannelMap {
            regions: vec![SubRegion {
                boundary: ConvexPolytope::rectangle(100.0, 100.0).unwrap(),
                path_loss: PathLoss { beta: 1.0, alpha: 2.0 },
            }],
            noise_power: 1.0,
            default_region: PathLoss { beta: 0.0, alpha: 2.0 },
        }
    }

    #[test]
    fn tracking_examples() {
        let r = vec![RobotState::new(0.0, 0.0, 0.0), RobotState::new(1.0, 2.0, 0.5)];
        assert_eq!(cost_tracking(&r, &r).unwrap(), 0.0);
        let mut s = r.clone();
        s[1].x += 1.0;
        assert_eq!(cost_tracking(&s, &r).unwrap(), 1.0);
        assert!(matches!(cost_tracking(&s[..1], &r), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn communication_unit_efficiency() {
        let sensors = [Sensor { id: 1, position: Point::new(0.0, 0.0), power: 1.0 }];
        assert_relative_eq!(cost_communication(&[RobotState::new(1.0, 0.0, 0.0)], &sensors, &map()), -1.0);
        let mut silent = map();
        silent.regions[0].path_loss.beta = 0.0;
        assert_eq!(cost_communication(&[RobotState::new(1.0, 0.0, 0.0)], &sensors, &silent), 0.0);
    }

    #[test]
    fn safety_examples() {
        assert_relative_eq!(cost_safety(&[0.1; 5], 0.1, 0.5).unwrap(), -0.5);
        assert_eq!(cost_safety(&[], 0.1, 0.5).unwrap(), 0.0);
        assert!(matches!(cost_safety(&[0.05], 0.1, 0.5), Err(Error::OutOfBounds { .. })));
    }
}
