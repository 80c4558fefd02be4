//! Power-law classification error of edge models and its curve fit.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    /// Scale `a_e`.
    pub a: f64,
    /// Decay `b_e`.
    pub b: f64,
    /// Samples already held by the edge server, `A_e`.
    pub historical_samples: f64,
    /// Bits per training sample, `D_e`.
    pub bits_per_sample: f64,
    /// Sensors feeding this model.
    pub sensor_group: BTreeSet<usize>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0 && self.bits_per_sample > 0.0 && self.historical_samples >= 0.0) {
            return Err(Error::Validation(format!(
                "model {}: need a > 0, b > 0, bits_per_sample > 0, historical_samples >= 0",
                self.name
            )));
        }
        if self.sensor_group.is_empty() {
            return Err(Error::Validation(format!("model {}: empty sensor group", self.name)));
        }
        Ok(())
    }

    /// `a (A + n)^-b`
    pub fn error_at(&self, new_samples: f64) -> Result<f64> {
        classification_error(self, new_samples)
    }
}

/// `a_e (n + A_e)^-b_e`
pub fn classification_error(spec: &ModelSpec, new_samples: f64) -> Result<f64> {
    let total = new_samples + spec.historical_samples;
    if !(total > 0.0) {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(spec.a * total.powf(-spec.b))
}

/// Fractional sample count delivered to `spec` by the per-sensor bits.
pub fn samples_from_bits(
    spec: &ModelSpec,
    collected: &BTreeMap<usize, f64>,
    known_sensors: &BTreeSet<usize>,
) -> Result<f64> {
    let mut bits = 0.0;
    for (&id, &b) in collected {
        if !known_sensors.contains(&id) {
            return Err(Error::UnknownSensor(id));
        }
        if !(b >= 0.0) {
            return Err(Error::InvalidPoint(format!("sensor {id} has negative bits {b}")));
        }
        if spec.sensor_group.contains(&id) {
            bits += b;
        }
    }
    Ok(bits / spec.bits_per_sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurveFit {
    pub a: f64,
    pub b: f64,
    /// Coefficient of determination in the log domain.
    pub r_squared: f64,
}

/// Least-squares fit of `log(err) = log(a) - b log(n)`.
pub fn fit_error_curve(points: &[(f64, f64)]) -> Result<ErrorCurveFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 points, got {}", points.len())));
    }
    for &(n, e) in points {
        if !(n > 0.0 && n.is_finite()) || !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidPoint(format!("({n}, {e}): sample count and error must be positive")));
        }
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) {
        return Err(Error::DegenerateFit("all sample counts are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let fit = ErrorCurveFit { a: intercept.exp(), b: -slope, r_squared };
    if fit.b <= 0.0 {
        log::warn!("fitted decay b = {} is not positive; error does not shrink with data", fit.b);
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(a: f64, b: f64, group: &[usize]) -> ModelSpec {
        ModelSpec {
            name: "m".into(),
            a,
            b,
            historical_samples: 100.0,
            bits_per_sample: 1000.0,
            sensor_group: group.iter().copied().collect(),
        }
    }

    #[test]
    fn error_anchors() {
        let cnn = spec(1.718, 0.3781, &[1]);
        let svm = spec(4.55, 0.7268, &[2]);
        assert_relative_eq!(classification_error(&cnn, 0.0).unwrap(), 0.301178, epsilon = 1e-6);
        assert_relative_eq!(classification_error(&svm, 0.0).unwrap(), 0.160107, epsilon = 1e-6);
        assert!(classification_error(&cnn, 10.0).unwrap() < classification_error(&cnn, 0.0).unwrap());
        let mut empty = cnn.clone();
        empty.historical_samples = 0.0;
        assert!(matches!(classification_error(&empty, 0.0), Err(Error::EmptyTrainingSet)));
        assert!(classification_error(&empty, 1.0).is_ok());
    }

    #[test]
    fn samples_from_bits_examples() {
        let known: BTreeSet<usize> = [1, 2].into();
        let one = spec(1.0, 0.5, &[1]);
        assert_eq!(samples_from_bits(&one, &[(1, 0.0)].into(), &known).unwrap(), 0.0);
        let both = spec(1.0, 0.5, &[1, 2]);
        assert_eq!(samples_from_bits(&both, &[(1, 2000.0), (2, 3000.0)].into(), &known).unwrap(), 5.0);
        assert_eq!(samples_from_bits(&one, &[(1, 2e4)].into(), &known).unwrap(), 20.0);
        assert!(matches!(samples_from_bits(&one, &[(7, 1.0)].into(), &known), Err(Error::UnknownSensor(7))));
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_error_curve(&[(10.0, 0.5)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_error_curve(&[(10.0, 0.5), (10.0, 0.4)]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_error_curve(&[(0.0, 0.5), (10.0, 0.4)]), Err(Error::InvalidPoint(_))));
        assert!(matches!(fit_error_curve(&[(1.0, -0.5), (10.0, 0.4)]), Err(Error::InvalidPoint(_))));
    }

    #[test]
    fn noiseless_recovery() {
        let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0].iter().map(|&n| (n, 2.0 * f64::powf(n, -0.5))).collect();
        let fit = fit_error_curve(&pts).unwrap();
        assert_relative_eq!(fit.a, 2.0, epsilon = 1e-9);
        assert_relative_eq!(fit.b, 0.5, epsilon = 1e-9);
    }
}
