//! Manipulation tasks: worlds, capture and success sets, scripted controllers.

mod balance;
pub mod config;
mod pushing;
mod toppling;
mod well;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    step, BodyDef, SimError, StepReport, World, WorldError, WorldState, Wrench, DEFAULT_DT,
};
use crate::geometry::{angle_diff, point_in_convex_polygon, Pose2, Shape, Twist2, Vec2};

pub use config::{
    BalanceConfig, ControlBoundsConfig, PushingConfig, Range, ScenarioConfig, ShapeConfig,
    TopplingConfig, WellConfig, SCENARIO_NAMES,
};
pub use well::barrier as well_barrier;

/// Object and end-effector state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub object_pose: Pose2,
    pub object_twist: Twist2,
    pub ee_pose: Pose2,
    pub ee_twist: Twist2,
    pub time: f64,
    /// World position of the spring anchor driving a compliant end-effector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ee_anchor: Option<Vec2>,
}

impl SystemState {
    pub fn is_finite(&self) -> bool {
        self.object_pose.is_finite()
            && self.object_twist.is_finite()
            && self.ee_pose.is_finite()
            && self.ee_twist.is_finite()
            && self.time.is_finite()
            && self.ee_anchor.is_none_or(|a| a.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub f_max: f64,
    pub tau_max: f64,
    pub min_steps: usize,
    pub max_steps: usize,
}

impl ControlBounds {
    pub fn from_config(c: &ControlBoundsConfig) -> Result<Self, ScenarioError> {
        if !(c.f_max.is_finite() && c.f_max > 0.0) {
            return Err(ScenarioError::Invalid("f_max must be positive".into()));
        }
        if !(c.tau_max.is_finite() && c.tau_max >= 0.0) {
            return Err(ScenarioError::Invalid(
                "tau_max must be non-negative".into(),
            ));
        }
        if c.min_steps < 1 || c.min_steps > c.max_steps {
            return Err(ScenarioError::Invalid(
                "control steps need 1 <= min_steps <= max_steps".into(),
            ));
        }
        Ok(Self {
            f_max: c.f_max,
            tau_max: c.tau_max,
            min_steps: c.min_steps,
            max_steps: c.max_steps,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaptureSetSpec {
    /// Region the end-effector sweeps within `horizon` seconds about its instantaneous
    /// center of rotation, widened to `footprint + margin` on either side.
    SweptSector {
        horizon: f64,
        margin: f64,
        footprint: f64,
    },
    /// Object CoM over the support surface, in the support's frame.
    SupportRegion {
        half_length: f64,
        shrink: f64,
        height_min: f64,
        height_max: f64,
    },
    /// Horizontal speed of the lowest object vertices stays below `threshold`.
    PivotSlipBound { threshold: f64 },
    /// Object CoM inside a fixed convex polygon.
    StaticRegion { polygon: Vec<Vec2> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Direction of the wall, rad.
    pub wall_angle: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuccessSetSpec {
    RegionGoal {
        polygon: Vec<Vec2>,
        alignment: Option<Alignment>,
    },
    OrientationGoal {
        angle: f64,
        tolerance: f64,
    },
}

/// Axis-aligned box on the object state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub max_speed: f64,
    pub max_omega: f64,
}

impl StateBox {
    pub fn unbounded() -> Self {
        Self {
            x: [f64::NEG_INFINITY, f64::INFINITY],
            y: [f64::NEG_INFINITY, f64::INFINITY],
            max_speed: f64::INFINITY,
            max_omega: f64::INFINITY,
        }
    }

    pub fn contains(&self, z: &SystemState) -> bool {
        let p = z.object_pose;
        let t = z.object_twist;
        (self.x[0]..=self.x[1]).contains(&p.x)
            && (self.y[0]..=self.y[1]).contains(&p.y)
            && t.linear().norm() <= self.max_speed
            && t.omega.abs() <= self.max_omega
    }

    /// Uniform sample of an object position and twist inside the box (finite boxes only).
    pub fn sample(&self, rng: &mut impl rand::Rng, template: &SystemState) -> SystemState {
        let mut z = *template;
        let uni = |rng: &mut dyn rand::RngCore, r: [f64; 2]| {
            if r[1] > r[0] {
                r[0] + (r[1] - r[0]) * rand::Rng::gen::<f64>(rng)
            } else {
                r[0]
            }
        };
        z.object_pose.x = uni(rng, self.x);
        z.object_pose.y = uni(rng, self.y);
        z.object_pose.theta = uni(rng, [-std::f64::consts::PI, std::f64::consts::PI]);
        let s = self.max_speed.min(1.0);
        let w = self.max_omega.min(10.0);
        z.object_twist = Twist2::new(uni(rng, [-s, s]), uni(rng, [-s, s]), uni(rng, [-w, w]));
        z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EePolicy {
    ConstantVelocity,
    SpringDynamics,
}

/// End-effector command produced by a scripted controller.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EeCommand {
    /// Twist of a kinematic end-effector.
    pub twist: Twist2,
    /// Velocity of the spring anchor of a compliant end-effector.
    pub anchor_velocity: Vec2,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("initially uncaptured: {0}")]
    InitiallyUncaptured(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub name: String,
    pub world: World,
    pub object: usize,
    pub ee: Option<usize>,
    /// Spring joint of a compliant end-effector.
    pub ee_spring: Option<usize>,
    pub control_bounds: ControlBounds,
    pub capture: CaptureSetSpec,
    pub success: SuccessSetSpec,
    pub kinematic_bounds: StateBox,
    pub ee_policy: EePolicy,
    pub datum_height: f64,
    pub dt: f64,
    /// Scripted run length in simulator steps.
    pub horizon_steps: usize,
    pub initial: SystemState,
    /// Combined friction coefficient at the object/end-effector contact.
    pub contact_mu: f64,
    pub config: ScenarioConfig,
    /// Poses of static bodies.
    base: WorldState,
    object_vertices: Vec<Vec2>,
    /// Lone compliant end-effector for propagating it without contacts.
    ee_world: Option<World>,
}

pub fn make_scenario(config: &ScenarioConfig) -> Result<ScenarioSpec, ScenarioError> {
    let spec = match config {
        ScenarioConfig::Pushing(c) => pushing::build(c)?,
        ScenarioConfig::Balance(c) => balance::build(c)?,
        ScenarioConfig::Toppling(c) => toppling::build(c)?,
        ScenarioConfig::Well(c) => well::build(c)?,
    };
    if !spec.capture_contains(&spec.initial, &spec.initial) {
        return Err(ScenarioError::InitiallyUncaptured(format!(
            "{} initial state lies outside its capture set",
            spec.name
        )));
    }
    Ok(spec)
}

pub fn make_pushing_scenario(config: &PushingConfig) -> Result<ScenarioSpec, ScenarioError> {
    make_scenario(&ScenarioConfig::Pushing(config.clone()))
}

pub fn make_balance_scenario(config: &BalanceConfig) -> Result<ScenarioSpec, ScenarioError> {
    make_scenario(&ScenarioConfig::Balance(config.clone()))
}

pub fn make_toppling_scenario(config: &TopplingConfig) -> Result<ScenarioSpec, ScenarioError> {
    make_scenario(&ScenarioConfig::Toppling(config.clone()))
}

pub fn make_well_scenario(config: &WellConfig) -> Result<ScenarioSpec, ScenarioError> {
    make_scenario(&ScenarioConfig::Well(config.clone()))
}

/// Partially assembled scenario handed back by the per-task builders.
pub(crate) struct Parts {
    pub name: &'static str,
    pub bodies: Vec<BodyDef>,
    pub static_poses: Vec<(usize, Pose2)>,
    pub springs: Vec<crate::dynamics::SpringJointDef>,
    pub gravity: Vec2,
    pub ground: Option<crate::dynamics::GroundFriction>,
    pub object: usize,
    pub ee: Option<usize>,
    pub ee_spring: Option<usize>,
    pub control: ControlBoundsConfig,
    pub capture: CaptureSetSpec,
    pub success: SuccessSetSpec,
    pub kinematic_bounds: StateBox,
    pub ee_policy: EePolicy,
    pub datum_height: f64,
    pub duration: f64,
    pub initial: SystemState,
    pub contact_mu: f64,
    pub config: ScenarioConfig,
}

impl Parts {
    pub fn finish(self) -> Result<ScenarioSpec, ScenarioError> {
        let object_vertices = match &self.bodies[self.object].shape {
            Shape::Polygon { vertices } => vertices.clone(),
            Shape::Circle { .. } => Vec::new(),
        };
        let ee_world = match (self.ee, self.ee_spring) {
            (Some(e), Some(s)) => {
                let mut sp = self.springs[s].clone();
                sp.body_index = 0;
                Some(World::new(
                    vec![self.bodies[e].clone()],
                    vec![sp],
                    self.gravity,
                )?)
            }
            _ => None,
        };
        let springs_empty = self.springs.is_empty();
        let mut world = World::new(self.bodies, self.springs, self.gravity)?;
        if let Some(g) = self.ground {
            world = world.with_ground_friction(g);
        }
        let mut base = world.initial_state();
        for (i, p) in self.static_poses {
            base.poses[i] = p;
        }
        let needs_settling = self.gravity != Vec2::ZERO || !springs_empty;
        let mut spec = ScenarioSpec {
            name: self.name.to_string(),
            control_bounds: ControlBounds::from_config(&self.control)?,
            world,
            object: self.object,
            ee: self.ee,
            ee_spring: self.ee_spring,
            capture: self.capture,
            success: self.success,
            kinematic_bounds: self.kinematic_bounds,
            ee_policy: self.ee_policy,
            datum_height: self.datum_height,
            dt: DEFAULT_DT,
            horizon_steps: (self.duration / DEFAULT_DT).round() as usize,
            initial: self.initial,
            contact_mu: self.contact_mu,
            config: self.config,
            base,
            object_vertices,
            ee_world,
        };
        if needs_settling {
            spec.initial = spec.settle(&spec.initial)?;
        }
        Ok(spec)
    }
}

/// Steps used to bring resting contacts into the integrator's steady state.
const SETTLE_STEPS: usize = 24;

impl ScenarioSpec {
    /// Full simulator state for `z`; spring anchors are held still.
    pub fn to_world_state(&self, z: &SystemState) -> WorldState {
        let mut ws = self.base.clone();
        ws.poses[self.object] = z.object_pose;
        ws.twists[self.object] = z.object_twist;
        if let Some(e) = self.ee {
            ws.poses[e] = z.ee_pose;
            ws.twists[e] = z.ee_twist;
        }
        if let (Some(s), Some(a)) = (self.ee_spring, z.ee_anchor) {
            ws.anchors[s] = a;
        }
        ws.time = z.time;
        ws
    }

    pub fn from_world_state(&self, ws: &WorldState) -> SystemState {
        let (ee_pose, ee_twist) = match self.ee {
            Some(e) => (ws.poses[e], ws.twists[e]),
            None => (Pose2::default(), Twist2::default()),
        };
        SystemState {
            object_pose: ws.poses[self.object],
            object_twist: ws.twists[self.object],
            ee_pose,
            ee_twist,
            time: ws.time,
            ee_anchor: self.ee_spring.map(|s| ws.anchors[s]),
        }
    }

    /// Lets `z` rest for a few steps with the end-effector held still.
    ///
    /// A body placed on a support with zero velocity needs one step to pick up its resting
    /// contact impulse; the settled state is a true equilibrium of the integrator.
    fn settle(&self, z: &SystemState) -> Result<SystemState, ScenarioError> {
        let mut calm = *z;
        calm.ee_twist = Twist2::default();
        let mut ws = self.to_world_state(&calm);
        for _ in 0..SETTLE_STEPS {
            ws = self
                .advance(&ws, &EeCommand::default(), Wrench::default())
                .map_err(|e| ScenarioError::Invalid(format!("initial state does not settle: {e}")))?
                .0;
        }
        let s = self.from_world_state(&ws);
        let ee_dynamic = self.ee.is_some_and(|e| self.world.bodies()[e].is_dynamic());
        Ok(SystemState {
            object_pose: s.object_pose,
            object_twist: s.object_twist,
            ee_pose: if ee_dynamic { s.ee_pose } else { z.ee_pose },
            ee_twist: if ee_dynamic { s.ee_twist } else { z.ee_twist },
            time: z.time,
            ee_anchor: z.ee_anchor,
        })
    }

    pub fn initial_state(&self) -> SystemState {
        self.initial
    }

    /// Object polygon vertices in world coordinates (empty for round objects).
    pub fn object_world_vertices(&self, z: &SystemState) -> Vec<Vec2> {
        self.object_vertices
            .iter()
            .map(|v| z.object_pose.transform_point(*v))
            .collect()
    }

    pub fn capture_contains(&self, z_init: &SystemState, z: &SystemState) -> bool {
        if !z.is_finite() {
            return false;
        }
        match &self.capture {
            CaptureSetSpec::SweptSector {
                horizon,
                margin,
                footprint,
            } => in_swept_sector(
                z_init,
                z.object_pose.position(),
                *horizon,
                footprint + margin,
            ),
            CaptureSetSpec::SupportRegion {
                half_length,
                shrink,
                height_min,
                height_max,
            } => {
                let d = (z.object_pose.position() - z.ee_pose.position()).rotated(-z.ee_pose.theta);
                d.x.abs() <= half_length - shrink && d.y >= *height_min && d.y <= *height_max
            }
            CaptureSetSpec::PivotSlipBound { threshold } => self.pivot_slip_speed(z) <= *threshold,
            CaptureSetSpec::StaticRegion { polygon } => {
                point_in_convex_polygon(z.object_pose.position(), polygon)
            }
        }
    }

    /// Horizontal speed of the object's lowest vertices (largest among near-ties).
    pub fn pivot_slip_speed(&self, z: &SystemState) -> f64 {
        let verts = self.object_world_vertices(z);
        if verts.is_empty() {
            return 0.0;
        }
        let low = verts.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
        let c = z.object_pose.position();
        let t = z.object_twist;
        verts
            .iter()
            .filter(|v| v.y <= low + 1e-3)
            .map(|v| {
                let r = *v - c;
                (t.vx - t.omega * r.y).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn success_contains(&self, z: &SystemState) -> bool {
        if !z.is_finite() {
            return false;
        }
        match &self.success {
            SuccessSetSpec::RegionGoal { polygon, alignment } => {
                if !point_in_convex_polygon(z.object_pose.position(), polygon) {
                    return false;
                }
                match alignment {
                    None => true,
                    Some(a) => match self.longest_edge_angle(z) {
                        Some(ang) => {
                            // undirected edge: compare modulo pi
                            let d = angle_diff(2.0 * ang, 2.0 * a.wall_angle).abs() / 2.0;
                            d <= a.tolerance
                        }
                        None => true,
                    },
                }
            }
            SuccessSetSpec::OrientationGoal { angle, tolerance } => {
                angle_diff(z.object_pose.theta, *angle).abs() <= *tolerance
            }
        }
    }

    fn longest_edge_angle(&self, z: &SystemState) -> Option<f64> {
        let v = self.object_world_vertices(z);
        let n = v.len();
        if n < 2 {
            return None;
        }
        let mut best = (0.0, 0.0);
        for i in 0..n {
            let e = v[(i + 1) % n] - v[i];
            let len = e.norm();
            if len > best.0 + 1e-12 {
                best = (len, e.y.atan2(e.x));
            }
        }
        Some(best.1)
    }

    /// Scripted end-effector command at simulator step `k`.
    pub fn scripted_control(&self, z: &SystemState, k: usize, seed: u64) -> EeCommand {
        if k >= self.horizon_steps {
            return EeCommand::default();
        }
        let t = k as f64 * self.dt;
        match &self.config {
            ScenarioConfig::Pushing(c) => pushing::command(self, c, z, t, seed),
            ScenarioConfig::Balance(c) => balance::command(c, t),
            ScenarioConfig::Toppling(c) => toppling::command(c, t),
            ScenarioConfig::Well(_) => EeCommand::default(),
        }
    }

    /// One simulator step under `cmd`, with `wrench` applied at the object's CoM.
    pub fn advance(
        &self,
        ws: &WorldState,
        cmd: &EeCommand,
        wrench: Wrench,
    ) -> Result<(WorldState, StepReport), SimError> {
        let mut ws = ws.clone();
        if let Some(e) = self.ee {
            if !self.world.bodies()[e].is_dynamic() {
                ws.twists[e] = cmd.twist;
            }
        }
        if let Some(s) = self.ee_spring {
            ws.anchor_velocities[s] = cmd.anchor_velocity;
        }
        let mut controls = vec![Wrench::default(); self.world.body_count()];
        controls[self.object] = wrench;
        step(&self.world, &ws, &controls, self.dt)
    }

    /// Runs the scripted controller from the initial state for `horizon_steps` steps.
    pub fn rollout(&self, seed: u64) -> Result<Rollout, SimError> {
        let mut ws = self.to_world_state(&self.initial);
        let mut states = Vec::with_capacity(self.horizon_steps + 1);
        let mut reports = Vec::with_capacity(self.horizon_steps);
        states.push(self.initial);
        for k in 0..self.horizon_steps {
            let z = self.from_world_state(&ws);
            let cmd = self.scripted_control(&z, k, seed);
            let (next, report) = self.advance(&ws, &cmd, Wrench::default())?;
            ws = next;
            states.push(self.from_world_state(&ws));
            reports.push(report);
        }
        Ok(Rollout { states, reports })
    }

    /// End-effector pose and twist after `dt` with no actuation and no object contact.
    pub fn propagate_ee(&self, z: &SystemState, dt: f64) -> Result<(Pose2, Twist2), SimError> {
        match (self.ee_policy, &self.ee_world, z.ee_anchor) {
            (EePolicy::SpringDynamics, Some(w), Some(anchor)) => {
                let mut ws = w.initial_state();
                ws.poses[0] = z.ee_pose;
                ws.twists[0] = z.ee_twist;
                ws.anchors[0] = anchor;
                let steps = (dt / self.dt).round().max(1.0) as usize;
                let h = dt / steps as f64;
                for _ in 0..steps {
                    ws = step(w, &ws, &[], h)?.0;
                }
                Ok((ws.poses[0], ws.twists[0]))
            }
            _ => {
                let p = z.ee_pose;
                let t = z.ee_twist;
                Ok((
                    Pose2::new(p.x + t.vx * dt, p.y + t.vy * dt, p.theta + t.omega * dt),
                    t,
                ))
            }
        }
    }

    /// Rebuilds this scenario with every friction coefficient shifted by `offset`.
    pub fn with_friction_offset(&self, offset: f64) -> Result<ScenarioSpec, ScenarioError> {
        make_scenario(&self.config.with_friction_offset(offset))
    }
}

/// States and step reports of a scripted run; `states` has one more entry than `reports`.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub states: Vec<SystemState>,
    pub reports: Vec<StepReport>,
}

/// Swept-sector membership of point `p` for the end-effector motion in `z_init`.
pub fn in_swept_sector(z_init: &SystemState, p: Vec2, horizon: f64, band: f64) -> bool {
    let ee = z_init.ee_pose.position();
    if (p - ee).norm() <= band {
        return true;
    }
    let v = z_init.ee_twist.linear();
    let w = z_init.ee_twist.omega;
    let speed = v.norm();
    if w.abs() * horizon < 1e-9 {
        if speed < 1e-12 {
            return false;
        }
        let dir = v * (1.0 / speed);
        let d = p - ee;
        let along = d.dot(dir);
        let lateral = d.cross(dir).abs();
        return along >= 0.0 && along <= speed * horizon && lateral <= band;
    }
    let center = ee + Vec2::new(-v.y, v.x) * (1.0 / w);
    let radius = speed / w.abs();
    let rp = p - center;
    if (rp.norm() - radius).abs() > band {
        return false;
    }
    let sweep = w.abs() * horizon;
    if sweep >= std::f64::consts::TAU {
        return true;
    }
    let r0 = ee - center;
    if r0.norm() < 1e-12 {
        // pure rotation: the footprint disk already covers the swept region
        return false;
    }
    let mut phi = r0.cross(rp).atan2(r0.dot(rp)) * w.signum();
    if phi < 0.0 {
        phi += std::f64::consts::TAU;
    }
    phi <= sweep
}

#[cfg(test)]
mod tests;

/// Frictionless 1 kg disk in empty space with no end-effector, for planner tests.
#[cfg(test)]
pub(crate) fn free_disk(f_max: f64, bounds: StateBox) -> ScenarioSpec {
    let big = vec![
        Vec2::new(-10.0, -10.0),
        Vec2::new(10.0, -10.0),
        Vec2::new(10.0, 10.0),
        Vec2::new(-10.0, 10.0),
    ];
    Parts {
        name: "free",
        bodies: vec![BodyDef::dynamic(Shape::circle(0.05), 1.0).with_friction(0.0)],
        static_poses: vec![],
        springs: vec![],
        gravity: Vec2::ZERO,
        ground: None,
        object: 0,
        ee: None,
        ee_spring: None,
        control: ControlBoundsConfig::new(f_max, 0.0),
        capture: CaptureSetSpec::StaticRegion {
            polygon: big.clone(),
        },
        success: SuccessSetSpec::RegionGoal {
            polygon: big,
            alignment: None,
        },
        kinematic_bounds: bounds,
        ee_policy: EePolicy::ConstantVelocity,
        datum_height: 0.0,
        duration: 1.0,
        initial: SystemState::default(),
        contact_mu: 0.0,
        config: ScenarioConfig::Well(WellConfig::default()),
    }
    .finish()
    .expect("free disk scenario")
}
