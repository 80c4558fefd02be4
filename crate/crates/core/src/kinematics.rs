//! Robot state, inputs, motion limits and the Ackermann model.
//!
//! The model is `x' = v cos(theta)`, `y' = v sin(theta)`,
//! `theta' = v tan(psi) / wheelbase`, discretized with one forward-Euler step
//! of length `step`. [`linearize`] returns its Jacobian expansion, which is
//! exact at the expansion point.

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Linear velocity, m/s.
    pub v: f64,
    /// Steering angle, rad.
    pub psi: f64,
}

impl ControlInput {
    pub fn new(v: f64, psi: f64) -> Self {
        Self { v, psi }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.v, self.psi)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self { v: v.x, psi: v.y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionLimits {
    pub u_min: ControlInput,
    pub u_max: ControlInput,
    /// Per-step input change bounds.
    pub a_min: ControlInput,
    pub a_max: ControlInput,
    pub wheelbase: f64,
    /// Slot length T0 in seconds.
    pub step: f64,
}

impl Default for MotionLimits {
    fn default() -> Self {
        Self {
            u_min: ControlInput::new(0.0, -0.6),
            u_max: ControlInput::new(1.5, 0.6),
            a_min: ControlInput::new(-0.4, -0.25),
            a_max: ControlInput::new(0.4, 0.25),
            wheelbase: 1.0,
            step: 0.2,
        }
    }
}

impl MotionLimits {
    pub fn validate(&self) -> Result<()> {
        let ok = self.u_min.v <= self.u_max.v
            && self.u_min.psi <= self.u_max.psi
            && self.a_min.v <= self.a_max.v
            && self.a_min.psi <= self.a_max.psi
            && self.wheelbase > 0.0
            && self.step > 0.0;
        if !ok {
            return Err(Error::Validation(format!("inconsistent motion limits: {self:?}")));
        }
        if self.u_min.psi.abs() >= FRAC_PI_2 || self.u_max.psi.abs() >= FRAC_PI_2 {
            return Err(Error::Validation("steering bounds must stay inside (-pi/2, pi/2)".into()));
        }
        Ok(())
    }

    fn in_box(&self, u: &ControlInput) -> bool {
        u.v >= self.u_min.v && u.v <= self.u_max.v && u.psi >= self.u_min.psi && u.psi <= self.u_max.psi
    }

    fn rate_ok(&self, prev: &ControlInput, next: &ControlInput) -> bool {
        let dv = next.v - prev.v;
        let dpsi = next.psi - prev.psi;
        dv >= self.a_min.v && dv <= self.a_max.v && dpsi >= self.a_min.psi && dpsi <= self.a_max.psi
    }
}

/// `E(s, u) = A s + B u + c`, stored relative to its expansion point so
/// that evaluation at that point reproduces the Euler step bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedDynamics {
    pub a: Matrix3<f64>,
    pub b: Matrix3x2<f64>,
    pub c: Vector3<f64>,
    ref_state: Vector3<f64>,
    ref_input: Vector2<f64>,
    ref_next: Vector3<f64>,
}

impl LinearizedDynamics {
    /// Next state as a raw (unwrapped) vector.
    pub fn propagate_vector(&self, s: &Vector3<f64>, u: &Vector2<f64>) -> Vector3<f64> {
        self.ref_next + self.a * (s - self.ref_state) + self.b * (u - self.ref_input)
    }

    pub fn propagate(&self, s: &RobotState, u: &ControlInput) -> RobotState {
        // Heading differences are taken on the circle around the reference.
        let mut sv = s.to_vector();
        sv.z = self.ref_state.z + wrap_angle(sv.z - self.ref_state.z);
        RobotState::from_vector(&self.propagate_vector(&sv, &u.to_vector()))
    }
}

fn check_steering(psi: f64) -> Result<()> {
    if !(psi.abs() < FRAC_PI_2) {
        return Err(Error::SingularSteering(psi));
    }
    Ok(())
}

fn euler(s: &Vector3<f64>, u: &Vector2<f64>, limits: &MotionLimits) -> Vector3<f64> {
    let t = limits.step;
    let (v, psi) = (u.x, u.y);
    Vector3::new(
        s.x + t * v * s.z.cos(),
        s.y + t * v * s.z.sin(),
        s.z + t * v * psi.tan() / limits.wheelbase,
    )
}

/// One forward-Euler step of the Ackermann model.
pub fn nonlinear_step(state: &RobotState, input: &ControlInput, limits: &MotionLimits) -> Result<RobotState> {
    check_steering(input.psi)?;
    Ok(RobotState::from_vector(&euler(&state.to_vector(), &input.to_vector(), limits)))
}

/// Jacobian linearization of [`nonlinear_step`] around `(ref_state, ref_input)`.
pub fn linearize(ref_state: &RobotState, ref_input: &ControlInput, limits: &MotionLimits) -> Result<LinearizedDynamics> {
    linearize_vector(&ref_state.to_vector(), ref_input, limits)
}

/// As [`linearize`], but around an unwrapped state vector.
pub fn linearize_vector(s: &Vector3<f64>, ref_input: &ControlInput, limits: &MotionLimits) -> Result<LinearizedDynamics> {
    check_steering(ref_input.psi)?;
    let t = limits.step;
    let l = limits.wheelbase;
    let (v, psi) = (ref_input.v, ref_input.psi);
    let (st, ct) = s.z.sin_cos();
    let a = Matrix3::new(1.0, 0.0, -t * v * st, 0.0, 1.0, t * v * ct, 0.0, 0.0, 1.0);
    let cos_psi = psi.cos();
    let b = Matrix3x2::new(t * ct, 0.0, t * st, 0.0, t * psi.tan() / l, t * v / (l * cos_psi * cos_psi));
    let u = ref_input.to_vector();
    let next = euler(s, &u, limits);
    let c = next - a * s - b * u;
    Ok(LinearizedDynamics { a, b, c, ref_state: *s, ref_input: u, ref_next: next })
}

/// True iff every input is inside the box and every consecutive change is
/// inside the rate bounds.
pub fn check_limits(plan: &[ControlInput], limits: &MotionLimits) -> bool {
    plan.iter().all(|u| limits.in_box(u)) && plan.windows(2).all(|w| limits.rate_ok(&w[0], &w[1]))
}
