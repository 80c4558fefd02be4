mod common;

use nalgebra::Vector2;
use proptest::prelude::*;
use rand::Rng;

use datanav::channel::{spectral_efficiency, ChannelMap, PathLoss, Sensor};
use datanav::kinematics::RobotState;
use datanav::surrogate::{surrogate_se, validate_surrogate, validate_surrogate_seeded, SurrogateExpansion};

fn plain(alpha: f64) -> (ChannelMap, Sensor) {
    let map = ChannelMap { regions: Vec::new(), noise_power: 1e-10, default_region: PathLoss { beta: 1e-4, alpha } };
    (map, Sensor { id: 3, position: Vector2::new(2.0, -1.0), power: 0.02 })
}

#[test]
fn touches_the_truth_at_the_expansion() {
    let (map, s) = plain(2.0);
    let star = RobotState::new(6.0, 2.0, 0.4);
    let exp = SurrogateExpansion::new(star, std::slice::from_ref(&s), &map);
    let p = star.position();
    assert!((surrogate_se(&p, &s, &map, &exp) - spectral_efficiency(&p, &s, &map)).abs() <= 1e-12);
    let r = validate_surrogate(&exp, &s, &map, 500);
    assert!(r.passed(), "{r:?}");
}

#[test]
fn heading_does_not_change_the_bound() {
    let (map, s) = plain(3.0);
    let a = SurrogateExpansion::new(RobotState::new(5.0, 1.0, 0.0), std::slice::from_ref(&s), &map);
    let b = SurrogateExpansion::new(RobotState::new(5.0, 1.0, 2.0), std::slice::from_ref(&s), &map);
    let q = Vector2::new(4.0, 3.0);
    assert_eq!(surrogate_se(&q, &s, &map, &a), surrogate_se(&q, &s, &map, &b));
}

#[test]
fn constant_gain_region_is_exact() {
    let (map, s) = plain(0.0);
    let exp = SurrogateExpansion::new(RobotState::new(0.0, 0.0, 0.0), std::slice::from_ref(&s), &map);
    for q in [Vector2::new(1.0, 1.0), Vector2::new(-8.0, 3.0), Vector2::new(20.0, 0.0)] {
        assert!((surrogate_se(&q, &s, &map, &exp) - spectral_efficiency(&q, &s, &map)).abs() <= 1e-12);
    }
}

#[test]
fn far_points_continue_linearly_below_zero() {
    let (map, s) = plain(2.0);
    let exp = SurrogateExpansion::new(RobotState::new(3.0, -1.0, 0.0), std::slice::from_ref(&s), &map);
    let f = |x: f64| surrogate_se(&Vector2::new(x, -1.0), &s, &map, &exp);
    // Past the zero crossing the bound is affine in r^alpha = (x - 2)^2.
    let (a, b, c) = (f(40.0), f(50.0), f(60.0));
    assert!(a < 0.0);
    let slope1 = (b - a) / (48.0f64.powi(2) - 38.0f64.powi(2));
    let slope2 = (c - b) / (58.0f64.powi(2) - 48.0f64.powi(2));
    assert!((slope1 - slope2).abs() <= 1e-9 * slope1.abs());
}

#[test]
fn random_maps_pass_the_validator() {
    let mut rng = common::rng(11);
    for i in 0..8 {
        let (map, s) = common::random_channel(&mut rng);
        let star = RobotState::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), 0.0);
        let exp = SurrogateExpansion::new(star, std::slice::from_ref(&s), &map);
        let r = validate_surrogate_seeded(&exp, &s, &map, 300, i);
        assert!(r.passed(), "{r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lower_bound_everywhere_in_region(
        alpha in 2.0f64..5.0,
        sx in -5.0f64..5.0, sy in -5.0f64..5.0,
        qx in -15.0f64..15.0, qy in -15.0f64..15.0,
    ) {
        let (map, s) = plain(alpha);
        let exp = SurrogateExpansion::new(RobotState::new(sx, sy, 0.0), std::slice::from_ref(&s), &map);
        let q = Vector2::new(qx, qy);
        prop_assert!(surrogate_se(&q, &s, &map, &exp) <= spectral_efficiency(&q, &s, &map) + 1e-9);
    }

    #[test]
    fn midpoint_concavity(
        alpha in 2.0f64..5.0,
        ax in -10.0f64..10.0, ay in -10.0f64..10.0,
        bx in -10.0f64..10.0, by in -10.0f64..10.0,
    ) {
        let (map, s) = plain(alpha);
        let exp = SurrogateExpansion::new(RobotState::new(4.0, 4.0, 0.0), std::slice::from_ref(&s), &map);
        let a = Vector2::new(ax, ay);
        let b = Vector2::new(bx, by);
        let f = |p: &Vector2<f64>| surrogate_se(p, &s, &map, &exp);
        prop_assert!(0.5 * (f(&a) + f(&b)) <= f(&((a + b) * 0.5)) + 1e-9);
    }
}
