//! Side-view toppling of a box with a spring-mounted fingertip.

use super::config::TopplingConfig;
use super::{
    CaptureSetSpec, EeCommand, EePolicy, Parts, ScenarioConfig, ScenarioError, ScenarioSpec,
    StateBox, SuccessSetSpec, SystemState,
};
use crate::dynamics::{combined_mu, BodyDef, SpringJointDef};
use crate::geometry::{Pose2, Shape, Twist2, Vec2};

const GRAVITY: f64 = 9.81;
const TABLE_WIDTH: f64 = 1.0;
const TABLE_THICKNESS: f64 = 0.1;

pub(super) fn build(c: &TopplingConfig) -> Result<ScenarioSpec, ScenarioError> {
    if !(c.stiffness.is_finite() && c.stiffness > 0.0) {
        return Err(ScenarioError::Invalid(
            "spring stiffness must be positive".into(),
        ));
    }
    if !(c.damping.is_finite() && c.damping >= 0.0) {
        return Err(ScenarioError::Invalid(
            "spring damping must be non-negative".into(),
        ));
    }
    if !(c.box_width > 0.0 && c.box_height > 0.0 && c.box_mass > 0.0) {
        return Err(ScenarioError::Invalid(
            "box dimensions and mass must be positive".into(),
        ));
    }
    if !(c.finger_radius > 0.0 && c.finger_mass > 0.0) {
        return Err(ScenarioError::Invalid(
            "fingertip radius and mass must be positive".into(),
        ));
    }
    if !(c.push_height > c.finger_radius && c.push_height <= c.box_height) {
        return Err(ScenarioError::Invalid(
            "push height must lie on the box face above the table".into(),
        ));
    }
    let bodies = vec![
        BodyDef::dynamic(Shape::rect(c.box_width, c.box_height), c.box_mass)
            .with_friction(c.mu_box),
        BodyDef::dynamic(Shape::circle(c.finger_radius), c.finger_mass).with_friction(c.mu_finger),
        BodyDef::fixed(Shape::rect(TABLE_WIDTH, TABLE_THICKNESS)).with_friction(c.mu_table),
    ];
    let finger = Vec2::new(0.5 * c.box_width + c.finger_radius + 0.0005, c.push_height);
    // anchor above the fingertip by its static sag
    let anchor = finger + Vec2::new(0.0, c.finger_mass * GRAVITY / c.stiffness);
    let spring = SpringJointDef {
        body_index: 1,
        anchor_world: anchor,
        stiffness: c.stiffness,
        damping: c.damping,
        rest_length: 0.0,
    };
    let initial = SystemState {
        object_pose: Pose2::new(0.0, 0.5 * c.box_height, 0.0),
        ee_pose: Pose2::new(finger.x, finger.y, 0.0),
        ee_twist: Twist2::default(),
        time: 0.0,
        ee_anchor: Some(anchor),
        ..Default::default()
    };
    Parts {
        name: "toppling",
        bodies,
        static_poses: vec![(2, Pose2::new(0.0, -0.5 * TABLE_THICKNESS, 0.0))],
        springs: vec![spring],
        gravity: Vec2::new(0.0, -GRAVITY),
        ground: None,
        object: 0,
        ee: Some(1),
        ee_spring: Some(0),
        control: c.control.clone(),
        capture: CaptureSetSpec::PivotSlipBound {
            threshold: c.slip_threshold,
        },
        success: SuccessSetSpec::OrientationGoal {
            angle: c.goal_angle,
            tolerance: c.goal_tolerance,
        },
        kinematic_bounds: StateBox {
            x: [-0.4, 0.4],
            y: [-0.05, 0.4],
            max_speed: 2.0,
            max_omega: 30.0,
        },
        ee_policy: EePolicy::SpringDynamics,
        datum_height: 0.0,
        duration: c.duration,
        initial,
        contact_mu: combined_mu(c.mu_box, c.mu_finger),
        config: ScenarioConfig::Toppling(c.clone()),
    }
    .finish()
}

pub(super) fn command(c: &TopplingConfig, t: f64) -> EeCommand {
    let active = c.anchor_speed > 0.0 && t * c.anchor_speed < c.anchor_travel;
    EeCommand {
        twist: Twist2::default(),
        anchor_velocity: if active {
            Vec2::new(-c.anchor_speed, -c.anchor_sink)
        } else {
            Vec2::ZERO
        },
    }
}
