use approx::assert_abs_diff_eq;
use nalgebra::{Vector2, Vector3};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

use datanav::kinematics::{check_limits, linearize, nonlinear_step, wrap_angle, ControlInput, MotionLimits, RobotState};

fn limits() -> MotionLimits {
    MotionLimits { wheelbase: 0.6, ..MotionLimits::default() }
}

#[test]
fn straight_line_advances_v_t() {
    let s = nonlinear_step(&RobotState::new(1.0, 2.0, 0.0), &ControlInput::new(1.5, 0.0), &limits()).unwrap();
    assert_abs_diff_eq!(s.x, 1.3, epsilon = 1e-15);
    assert_abs_diff_eq!(s.y, 2.0, epsilon = 1e-15);
    assert_abs_diff_eq!(s.theta, 0.0, epsilon = 1e-15);
}

#[test]
fn heading_rate_follows_steering() {
    let l = limits();
    let s = nonlinear_step(&RobotState::new(0.0, 0.0, 0.3), &ControlInput::new(1.0, 0.4), &l).unwrap();
    assert_abs_diff_eq!(s.theta, 0.3 + 0.2 * 0.4f64.tan() / 0.6, epsilon = 1e-14);
}

#[test]
fn right_angle_steering_is_singular() {
    assert!(nonlinear_step(&RobotState::new(0.0, 0.0, 0.0), &ControlInput::new(1.0, FRAC_PI_2), &limits()).is_err());
}

#[test]
fn limit_checker_covers_box_and_rates() {
    let l = limits();
    assert!(check_limits(&[ControlInput::new(0.2, 0.0), ControlInput::new(0.6, 0.2)], &l));
    assert!(!check_limits(&[ControlInput::new(0.2, 0.0), ControlInput::new(0.7, 0.0)], &l));
    assert!(!check_limits(&[ControlInput::new(1.6, 0.0)], &l));
    assert!(!check_limits(&[ControlInput::new(0.5, 0.0), ControlInput::new(0.5, 0.3)], &l));
}

fn euler(s: &Vector3<f64>, u: &Vector2<f64>, l: &MotionLimits) -> Vector3<f64> {
    let t = l.step;
    Vector3::new(s.x + t * u.x * s.z.cos(), s.y + t * u.x * s.z.sin(), s.z + t * u.x * u.y.tan() / l.wheelbase)
}

proptest! {
    #[test]
    fn wrap_angle_lands_in_half_open_interval(theta in -50.0f64..50.0) {
        let w = wrap_angle(theta);
        prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
        let k = ((theta - w) / (2.0 * PI)).round();
        prop_assert!((theta - w - 2.0 * PI * k).abs() <= 1e-9);
    }

    #[test]
    fn linearization_is_exact_at_its_point_and_first_order_nearby(
        x in -5.0f64..5.0, y in -5.0f64..5.0, theta in -3.0f64..3.0,
        v in 0.0f64..1.5, psi in -0.5f64..0.5,
        ds in prop::array::uniform3(-1e-3f64..1e-3), du in prop::array::uniform2(-1e-3f64..1e-3),
    ) {
        let l = limits();
        let s = RobotState::new(x, y, theta);
        let u = ControlInput::new(v, psi);
        let lin = linearize(&s, &u, &l).unwrap();
        let exact = nonlinear_step(&s, &u, &l).unwrap();
        let at = lin.propagate(&s, &u);
        prop_assert!((at.to_vector() - exact.to_vector()).norm() <= 1e-12);

        let s1 = s.to_vector() + Vector3::from(ds);
        let u1 = u.to_vector() + Vector2::from(du);
        let approx = lin.propagate_vector(&s1, &u1);
        let truth = euler(&s1, &u1, &l);
        // Second-order remainder of a smooth map over a 1e-3 step.
        prop_assert!((approx - truth).norm() <= 1e-5);
    }
}
