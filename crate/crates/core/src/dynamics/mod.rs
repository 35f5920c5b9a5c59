//! Fixed-timestep planar rigid-body simulator.
//!
//! Velocities are integrated with a midpoint position update so that the work
//! done by every force and impulse is measured exactly; contact resolution uses
//! sequential impulses with per-constraint energy caps, which keeps contact
//! dissipation non-positive.

mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{shape_distance, Collider, Pose2, Shape, ShapeError, Twist2, Vec2};

pub use solver::step;

/// Default simulator timestep in seconds.
pub const DEFAULT_DT: f64 = 1.0 / 240.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Dynamic,
    Kinematic,
    Static,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyDef {
    pub shape: Shape,
    pub mass: f64,
    pub inertia: f64,
    pub motion_kind: MotionKind,
    pub friction_mu: f64,
    pub restitution: f64,
}

impl BodyDef {
    /// Dynamic body with uniform-density inertia.
    pub fn dynamic(shape: Shape, mass: f64) -> Self {
        let inertia = shape.unit_inertia(mass);
        Self {
            shape,
            mass,
            inertia,
            motion_kind: MotionKind::Dynamic,
            friction_mu: 0.5,
            restitution: 0.0,
        }
    }

    pub fn kinematic(shape: Shape) -> Self {
        Self {
            shape,
            mass: 0.0,
            inertia: 0.0,
            motion_kind: MotionKind::Kinematic,
            friction_mu: 0.5,
            restitution: 0.0,
        }
    }

    pub fn fixed(shape: Shape) -> Self {
        Self {
            motion_kind: MotionKind::Static,
            ..Self::kinematic(shape)
        }
    }

    pub fn with_friction(mut self, mu: f64) -> Self {
        self.friction_mu = mu;
        self
    }

    pub fn with_restitution(mut self, e: f64) -> Self {
        self.restitution = e;
        self
    }

    pub fn is_dynamic(&self) -> bool {
        self.motion_kind == MotionKind::Dynamic
    }
}

/// Zero-length-capable spring-damper between a body's center of mass and a world anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpringJointDef {
    pub body_index: usize,
    pub anchor_world: Vec2,
    pub stiffness: f64,
    pub damping: f64,
    pub rest_length: f64,
}

/// Coulomb friction against a virtual support plane under every dynamic body (top-down scenes).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundFriction {
    pub mu: f64,
    /// Acceleration producing the normal load, m/s².
    pub normal_accel: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub velocity_iterations: usize,
    pub baumgarte: f64,
    pub slop: f64,
    pub restitution_threshold: f64,
    /// Penetration beyond this fraction of the smaller body's extent aborts the step.
    pub tunneling_fraction: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            velocity_iterations: 10,
            baumgarte: 0.2,
            slop: 1e-3,
            restitution_threshold: 0.1,
            tunneling_fraction: 0.1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("body {index}: {source}")]
    Shape {
        index: usize,
        #[source]
        source: ShapeError,
    },
    #[error("body {index}: {reason}")]
    InvalidBody { index: usize, reason: String },
    #[error("spring {index}: {reason}")]
    InvalidSpring { index: usize, reason: String },
    #[error("gravity must be finite")]
    InvalidGravity,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("tunneling detected between bodies {a} and {b}: penetration {depth:.4} m")]
    Tunneling { a: usize, b: usize, depth: f64 },
    #[error("invalid step input: {0}")]
    InvalidInput(String),
    #[error("simulation produced non-finite state")]
    NonFinite,
}

/// Immutable world definition.
#[derive(Clone, Debug)]
pub struct World {
    bodies: Vec<BodyDef>,
    colliders: Vec<Collider>,
    springs: Vec<SpringJointDef>,
    gravity: Vec2,
    ground: Option<GroundFriction>,
    params: SolverParams,
}

pub fn build_world(
    bodies: Vec<BodyDef>,
    springs: Vec<SpringJointDef>,
    gravity: Vec2,
) -> Result<World, WorldError> {
    World::new(bodies, springs, gravity)
}

impl World {
    pub fn new(
        bodies: Vec<BodyDef>,
        springs: Vec<SpringJointDef>,
        gravity: Vec2,
    ) -> Result<Self, WorldError> {
        if !gravity.is_finite() {
            return Err(WorldError::InvalidGravity);
        }
        let mut colliders = Vec::with_capacity(bodies.len());
        for (index, b) in bodies.iter().enumerate() {
            let c =
                Collider::new(&b.shape).map_err(|source| WorldError::Shape { index, source })?;
            let bad = |reason: &str| WorldError::InvalidBody {
                index,
                reason: reason.to_string(),
            };
            if b.is_dynamic() {
                if !(b.mass.is_finite() && b.mass > 0.0) {
                    return Err(bad("dynamic body needs positive mass"));
                }
                if !(b.inertia.is_finite() && b.inertia > 0.0) {
                    return Err(bad("dynamic body needs positive inertia"));
                }
            }
            if !(b.friction_mu.is_finite() && b.friction_mu >= 0.0) {
                return Err(bad("friction must be finite and non-negative"));
            }
            if !(0.0..=1.0).contains(&b.restitution) {
                return Err(bad("restitution must lie in [0, 1]"));
            }
            colliders.push(c);
        }
        for (index, s) in springs.iter().enumerate() {
            let bad = |reason: &str| WorldError::InvalidSpring {
                index,
                reason: reason.to_string(),
            };
            if s.body_index >= bodies.len() {
                return Err(bad("body index out of range"));
            }
            if !(s.stiffness.is_finite() && s.stiffness >= 0.0) {
                return Err(bad("stiffness must be non-negative"));
            }
            if !(s.damping.is_finite() && s.damping >= 0.0) {
                return Err(bad("damping must be non-negative"));
            }
            if !(s.rest_length.is_finite() && s.rest_length >= 0.0) {
                return Err(bad("rest length must be non-negative"));
            }
            if !s.anchor_world.is_finite() {
                return Err(bad("anchor must be finite"));
            }
        }
        Ok(Self {
            bodies,
            colliders,
            springs,
            gravity,
            ground: None,
            params: SolverParams::default(),
        })
    }

    pub fn with_ground_friction(mut self, ground: GroundFriction) -> Self {
        self.ground = Some(ground);
        self
    }

    pub fn with_params(mut self, params: SolverParams) -> Self {
        self.params = params;
        self
    }

    pub fn bodies(&self) -> &[BodyDef] {
        &self.bodies
    }

    pub fn springs(&self) -> &[SpringJointDef] {
        &self.springs
    }

    pub fn gravity(&self) -> Vec2 {
        self.gravity
    }

    pub fn ground(&self) -> Option<GroundFriction> {
        self.ground
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn body_count(&self) -> usize {
        self.bodies.len()
    }

    /// Smallest width of a body's shape.
    pub fn min_extent(&self, body: usize) -> f64 {
        self.colliders[body].min_extent
    }

    /// Bounding radius of a body's shape about its center of mass.
    pub fn bound_radius(&self, body: usize) -> f64 {
        self.colliders[body].bound_radius
    }

    /// All bodies at the origin, at rest, anchors at their defined positions.
    pub fn initial_state(&self) -> WorldState {
        WorldState {
            poses: vec![Pose2::default(); self.bodies.len()],
            twists: vec![Twist2::default(); self.bodies.len()],
            time: 0.0,
            anchors: self.springs.iter().map(|s| s.anchor_world).collect(),
            anchor_velocities: vec![Vec2::ZERO; self.springs.len()],
        }
    }

    pub(crate) fn collider(&self, body: usize) -> &Collider {
        &self.colliders[body]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub poses: Vec<Pose2>,
    pub twists: Vec<Twist2>,
    pub time: f64,
    /// Current world position of each spring's anchor.
    #[serde(default)]
    pub anchors: Vec<Vec2>,
    /// Anchor velocities, held constant across a step.
    #[serde(default)]
    pub anchor_velocities: Vec<Vec2>,
}

/// Force at the center of mass plus torque.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fy: f64,
    pub tau: f64,
}

impl Wrench {
    pub fn new(fx: f64, fy: f64, tau: f64) -> Self {
        Self { fx, fy, tau }
    }

    pub fn force(&self) -> Vec2 {
        Vec2::new(self.fx, self.fy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub point: Vec2,
    /// Unit normal from body A into body B.
    pub normal: Vec2,
    /// Step-averaged normal force, N.
    pub normal_force: f64,
    /// Step-averaged friction force along the CCW perpendicular of the normal, N.
    pub tangent_force: f64,
    pub slip_speed: f64,
    pub body_pair: (usize, usize),
    /// Combined friction coefficient of the pair.
    pub mu: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub contacts: Vec<ContactPoint>,
    /// Work of all contact friction, inelastic impacts and damping; never positive.
    pub w_noncons: f64,
    /// Work of applied wrenches, kinematic bodies and moving spring anchors.
    pub w_control: f64,
    /// Energy injected by penetration correction and spring iteration residuals.
    pub w_numerical: f64,
    pub dt: f64,
}

impl StepReport {
    pub fn contacts_between(&self, a: usize, b: usize) -> impl Iterator<Item = &ContactPoint> {
        let key = (a.min(b), a.max(b));
        self.contacts.iter().filter(move |c| c.body_pair == key)
    }
}

/// Exact distance between two bodies' shapes, zero when touching or overlapping.
pub fn min_body_distance(world: &World, state: &WorldState, body_a: usize, body_b: usize) -> f64 {
    let a = world.collider(body_a).placed(&state.poses[body_a]);
    let b = world.collider(body_b).placed(&state.poses[body_b]);
    shape_distance(&a, &b)
}

/// Combined friction coefficient of two bodies.
pub fn combined_mu(a: f64, b: f64) -> f64 {
    (a * b).sqrt()
}

#[cfg(test)]
mod tests;
