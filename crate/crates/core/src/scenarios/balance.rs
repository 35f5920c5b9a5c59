//! Side-view transport of a cube on an inclined support plate.
//!
//! The plate's frame is the world frame; the slope enters through a tilted gravity vector.

use super::config::BalanceConfig;
use super::{
    CaptureSetSpec, EeCommand, EePolicy, Parts, ScenarioConfig, ScenarioError, ScenarioSpec,
    StateBox, SuccessSetSpec, SystemState,
};
use crate::dynamics::{combined_mu, BodyDef};
use crate::geometry::{Pose2, Shape, Twist2, Vec2};

const GRAVITY: f64 = 9.81;

/// Support velocity along the slope at time `t`.
pub(super) fn support_speed(c: &BalanceConfig, t: f64) -> f64 {
    let v_max = c.accel * c.accel_time;
    if t < c.accel_time {
        return c.accel * t;
    }
    let t = t - c.accel_time;
    if t < c.cruise_time {
        return v_max;
    }
    let t = t - c.cruise_time;
    let slowed = v_max.abs() - c.decel * t;
    if slowed <= 0.0 {
        0.0
    } else {
        slowed * v_max.signum()
    }
}

/// Distance covered by the support once it has stopped.
pub(super) fn support_travel(c: &BalanceConfig) -> f64 {
    let v_max = c.accel * c.accel_time;
    let stop = if c.decel > 0.0 {
        v_max.abs() / c.decel
    } else {
        0.0
    };
    0.5 * c.accel * c.accel_time * c.accel_time + v_max * c.cruise_time + 0.5 * v_max * stop
}

pub(super) fn build(c: &BalanceConfig) -> Result<ScenarioSpec, ScenarioError> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&c.slope) {
        return Err(ScenarioError::Invalid("slope must lie in [0, pi/2)".into()));
    }
    if !(c.cube_size > 0.0 && c.cube_mass > 0.0 && c.support_thickness > 0.0) {
        return Err(ScenarioError::Invalid(
            "cube and support sizes must be positive".into(),
        ));
    }
    if c.support_length <= c.cube_size {
        return Err(ScenarioError::Invalid(
            "support must be longer than the cube".into(),
        ));
    }
    if !(c.decel > 0.0) {
        return Err(ScenarioError::Invalid(
            "deceleration must be positive".into(),
        ));
    }
    let top = 0.5 * c.support_thickness;
    let bodies = vec![
        BodyDef::dynamic(Shape::rect(c.cube_size, c.cube_size), c.cube_mass)
            .with_friction(c.mu_cube),
        BodyDef::kinematic(Shape::rect(c.support_length, c.support_thickness))
            .with_friction(c.mu_support),
    ];
    let gravity = Vec2::new(-GRAVITY * c.slope.sin(), -GRAVITY * c.slope.cos());
    let initial = SystemState {
        object_pose: Pose2::new(c.cube_offset, top + 0.5 * c.cube_size, 0.0),
        ee_pose: Pose2::new(0.0, 0.0, 0.0),
        ee_twist: Twist2::new(support_speed(c, 0.0), 0.0, 0.0),
        ..Default::default()
    };
    let goal_x = c.cube_offset + support_travel(c);
    let (lo, hi) = (goal_x - c.goal_half_width, goal_x + c.goal_half_width);
    let goal = vec![
        Vec2::new(lo, top),
        Vec2::new(hi, top),
        Vec2::new(hi, top + c.cube_size),
        Vec2::new(lo, top + c.cube_size),
    ];
    Parts {
        name: "balance",
        bodies,
        static_poses: vec![],
        springs: vec![],
        gravity,
        ground: None,
        object: 0,
        ee: Some(1),
        ee_spring: None,
        control: c.control.clone(),
        capture: CaptureSetSpec::SupportRegion {
            half_length: 0.5 * c.support_length,
            shrink: c.support_shrink,
            height_min: top,
            height_max: top + c.cube_size,
        },
        success: SuccessSetSpec::RegionGoal {
            polygon: goal,
            alignment: None,
        },
        kinematic_bounds: StateBox {
            x: [-2.0, 2.0],
            y: [-1.0, 1.0],
            max_speed: 3.0,
            max_omega: 30.0,
        },
        ee_policy: EePolicy::ConstantVelocity,
        datum_height: 0.0,
        duration: c.duration,
        initial,
        contact_mu: combined_mu(c.mu_cube, c.mu_support),
        config: ScenarioConfig::Balance(c.clone()),
    }
    .finish()
}

pub(super) fn command(c: &BalanceConfig, t: f64) -> EeCommand {
    EeCommand {
        twist: Twist2::new(support_speed(c, t), 0.0, 0.0),
        anchor_velocity: Vec2::ZERO,
    }
}
