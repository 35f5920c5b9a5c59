//! Top-down pushing of an object toward a wall.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::PushingConfig;
use super::{
    Alignment, CaptureSetSpec, EeCommand, EePolicy, Parts, ScenarioConfig, ScenarioError,
    ScenarioSpec, StateBox, SuccessSetSpec, SystemState,
};
use crate::dynamics::{combined_mu, BodyDef, GroundFriction};
use crate::geometry::{Collider, Pose2, Shape, Twist2, Vec2};

const WALL_THICKNESS: f64 = 0.05;
const WALL_LENGTH: f64 = 1.2;
const GRAVITY: f64 = 9.81;
/// Amplitude of the seeded velocity noise added to the pusher's sway, m/s.
const NOISE_AMPLITUDE: f64 = 0.006;

/// Half of the object's width normal to its longest edge.
pub(super) fn half_depth(shape: &Shape) -> f64 {
    match shape {
        Shape::Circle { radius } => *radius,
        Shape::Polygon { vertices } => {
            let n = vertices.len();
            let (mut best, mut dir) = (0.0, Vec2::new(1.0, 0.0));
            for i in 0..n {
                let e = vertices[(i + 1) % n] - vertices[i];
                if e.norm() > best + 1e-12 {
                    best = e.norm();
                    dir = e * (1.0 / best);
                }
            }
            let perp = dir.perp();
            let (lo, hi) = vertices.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| {
                (lo.min(v.dot(perp)), hi.max(v.dot(perp)))
            });
            0.5 * (hi - lo)
        }
    }
}

fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<Vec2> {
    vec![
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
    ]
}

pub(super) fn build(c: &PushingConfig) -> Result<ScenarioSpec, ScenarioError> {
    let object_shape = c.object.to_shape();
    let pusher_shape = c.pusher.to_shape();
    let object_col =
        Collider::new(&object_shape).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let pusher_col =
        Collider::new(&pusher_shape).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    if !(c.object_mass > 0.0) {
        return Err(ScenarioError::Invalid(
            "object mass must be positive".into(),
        ));
    }
    let depth = half_depth(&object_shape);
    let footprint = pusher_col.bound_radius;

    let object_pose = Pose2::new(0.0, 0.0, c.object_theta);
    let lowest = match &object_shape {
        Shape::Circle { radius } => -radius,
        Shape::Polygon { vertices } => vertices
            .iter()
            .map(|v| object_pose.transform_point(*v).y)
            .fold(f64::INFINITY, f64::min),
    };
    let pusher_reach = match &pusher_shape {
        Shape::Circle { radius } => *radius,
        Shape::Polygon { vertices } => -vertices.iter().map(|v| v.y).fold(f64::INFINITY, f64::min),
    };
    let ee_pose = Pose2::new(c.contact_offset, lowest - pusher_reach - 0.001, 0.0);
    if c.wall_y <= object_col.bound_radius + 0.01 {
        return Err(ScenarioError::Invalid("wall overlaps the object".into()));
    }

    let bodies = vec![
        BodyDef::dynamic(object_shape, c.object_mass).with_friction(c.mu_object),
        BodyDef::kinematic(pusher_shape).with_friction(c.mu_pusher),
        BodyDef::fixed(Shape::rect(WALL_LENGTH, WALL_THICKNESS)).with_friction(c.mu_wall),
    ];
    let wall_pose = Pose2::new(0.0, c.wall_y + 0.5 * WALL_THICKNESS, 0.0);

    let mut initial = SystemState {
        object_pose,
        ee_pose,
        ..Default::default()
    };
    initial.ee_twist = sway_twist(c, 0.0, 0);

    let goal = rect(
        -c.goal_half_width,
        c.goal_half_width,
        c.wall_y - c.wall_distance_factor * depth,
        c.wall_y,
    );
    Parts {
        name: "pushing",
        bodies,
        static_poses: vec![(2, wall_pose)],
        springs: vec![],
        gravity: Vec2::ZERO,
        ground: Some(GroundFriction {
            mu: c.mu_ground,
            normal_accel: GRAVITY,
        }),
        object: 0,
        ee: Some(1),
        ee_spring: None,
        control: c.control.clone(),
        capture: CaptureSetSpec::SweptSector {
            horizon: c.sector_horizon,
            margin: c.sector_margin_factor * footprint,
            footprint,
        },
        success: SuccessSetSpec::RegionGoal {
            polygon: goal,
            alignment: Some(Alignment {
                wall_angle: 0.0,
                tolerance: c.align_tolerance,
            }),
        },
        kinematic_bounds: StateBox {
            x: [-0.4, 0.4],
            y: [-0.2, c.wall_y + 0.05],
            max_speed: 1.0,
            max_omega: 20.0,
        },
        ee_policy: EePolicy::ConstantVelocity,
        datum_height: 0.0,
        duration: c.duration,
        initial,
        contact_mu: combined_mu(c.mu_object, c.mu_pusher),
        config: ScenarioConfig::Pushing(c.clone()),
    }
    .finish()
}

/// Lateral sway plus seeded noise on top of a steady forward push.
fn sway_twist(c: &PushingConfig, t: f64, seed: u64) -> Twist2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = 0.0;
    for _ in 0..3 {
        let f: f64 = rng.gen_range(0.5..4.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        noise += (f * t + phase).sin();
    }
    let sway = c.sway_amplitude * c.sway_frequency * (c.sway_frequency * t + c.sway_phase).cos();
    Twist2::new(sway + NOISE_AMPLITUDE / 3.0 * noise, c.push_speed, 0.0)
}

pub(super) fn command(
    spec: &ScenarioSpec,
    c: &PushingConfig,
    z: &SystemState,
    t: f64,
    seed: u64,
) -> EeCommand {
    let depth = half_depth(&c.object.to_shape());
    let reach = spec.world.bound_radius(1);
    let at_wall = z.ee_pose.y + reach >= c.wall_y - 2.0 * depth - 0.001;
    if at_wall || spec.success_contains(z) {
        return EeCommand::default();
    }
    EeCommand {
        twist: sway_twist(c, t, seed),
        anchor_velocity: Vec2::ZERO,
    }
}
