use super::config::WellConfig;
use super::{
    CaptureSetSpec, EePolicy, Parts, ScenarioConfig, ScenarioError, ScenarioSpec, StateBox,
    SuccessSetSpec, SystemState,
};
use crate::dynamics::BodyDef;
use crate::geometry::{Pose2, Shape, Vec2};

const GRAVITY: f64 = 9.81;
const WALL: f64 = 0.05;

pub(super) fn build(c: &WellConfig) -> Result<ScenarioSpec, ScenarioError> {
    if !(c.radius > 0.0 && c.mass > 0.0 && c.depth > 0.0 && c.clearance >= 0.0) {
        return Err(ScenarioError::Invalid(
            "well dimensions must be positive".into(),
        ));
    }
    let half = c.radius + c.clearance;
    let rim = c.radius + c.depth;
    // walls rise past the rim so the only way out is over the top
    let wall_top = if c.sealed {
        2.0 * c.radius + 0.5 * c.depth
    } else {
        rim + c.radius + 0.05
    };
    let floor_w = 2.0 * (half + WALL);
    let disk = BodyDef::dynamic(Shape::circle(c.radius), c.mass).with_friction(0.0);
    let mut bodies = vec![
        disk,
        BodyDef::fixed(Shape::rect(floor_w, WALL)).with_friction(0.0),
        BodyDef::fixed(Shape::rect(WALL, wall_top + WALL)).with_friction(0.0),
        BodyDef::fixed(Shape::rect(WALL, wall_top + WALL)).with_friction(0.0),
    ];
    let wall_y = 0.5 * (wall_top - WALL);
    let mut statics = vec![
        (1, Pose2::new(0.0, -0.5 * WALL, 0.0)),
        (2, Pose2::new(-half - 0.5 * WALL, wall_y, 0.0)),
        (3, Pose2::new(half + 0.5 * WALL, wall_y, 0.0)),
    ];
    if c.sealed {
        bodies.push(BodyDef::fixed(Shape::rect(floor_w, WALL)).with_friction(0.0));
        statics.push((4, Pose2::new(0.0, wall_top + 0.5 * WALL, 0.0)));
    }
    let region = vec![
        Vec2::new(-half, -c.radius),
        Vec2::new(half, -c.radius),
        Vec2::new(half, rim),
        Vec2::new(-half, rim),
    ];
    let kinematic_bounds = StateBox {
        x: [-half - 0.1, half + 0.1],
        y: [-0.01, wall_top + 0.2],
        max_speed: 5.0,
        max_omega: f64::INFINITY,
    };
    Parts {
        name: "well",
        bodies,
        static_poses: statics,
        springs: vec![],
        gravity: Vec2::new(0.0, -GRAVITY),
        ground: None,
        object: 0,
        ee: None,
        ee_spring: None,
        control: c.control.clone(),
        capture: CaptureSetSpec::StaticRegion {
            polygon: region.clone(),
        },
        success: SuccessSetSpec::RegionGoal {
            polygon: region,
            alignment: None,
        },
        kinematic_bounds,
        ee_policy: EePolicy::ConstantVelocity,
        datum_height: 0.0,
        duration: 1.0,
        initial: SystemState {
            object_pose: Pose2::new(0.0, c.radius, 0.0),
            ..Default::default()
        },
        contact_mu: 0.0,
        config: ScenarioConfig::Well(c.clone()),
    }
    .finish()
}

/// Conservative escape barrier m·g·depth of a well.
pub fn barrier(c: &WellConfig) -> f64 {
    c.mass * GRAVITY * c.depth
}
