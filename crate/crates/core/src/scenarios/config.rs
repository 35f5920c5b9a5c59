//! Serializable scenario parameters, including the randomization used for data generation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Shape, Vec2};

/// Object or end-effector outline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeConfig {
    Rect { width: f64, height: f64 },
    Circle { radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl ShapeConfig {
    pub fn to_shape(&self) -> Shape {
        match self {
            ShapeConfig::Rect { width, height } => Shape::rect(*width, *height),
            ShapeConfig::Circle { radius } => Shape::circle(*radius),
            ShapeConfig::Polygon { vertices } => {
                let verts: Vec<Vec2> = vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
                // recenter on the area centroid so the body origin is its center of mass
                let c = Shape::polygon(verts.clone()).centroid();
                Shape::polygon(verts.into_iter().map(|v| v - c).collect())
            }
        }
    }
}

/// Uniform range `[lo, hi]`; `lo == hi` disables the draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlBoundsConfig {
    pub f_max: f64,
    pub tau_max: f64,
    pub min_steps: usize,
    pub max_steps: usize,
}

impl ControlBoundsConfig {
    pub fn new(f_max: f64, tau_max: f64) -> Self {
        Self {
            f_max,
            tau_max,
            min_steps: 12,
            max_steps: 60,
        }
    }
}

impl Default for ControlBoundsConfig {
    fn default() -> Self {
        Self::new(5.0, 0.5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushingConfig {
    pub object: ShapeConfig,
    pub object_mass: f64,
    /// Round pusher (`circle`) or flat jaw (`rect`).
    pub pusher: ShapeConfig,
    /// y coordinate of the wall face.
    pub wall_y: f64,
    pub mu_ground: f64,
    pub mu_object: f64,
    pub mu_pusher: f64,
    pub mu_wall: f64,
    pub push_speed: f64,
    /// Amplitude of the pusher's lateral sway, m.
    pub sway_amplitude: f64,
    /// Sway angular frequency, rad/s.
    pub sway_frequency: f64,
    pub sway_phase: f64,
    /// Lateral offset of the pusher from the object's center at the start, m.
    pub contact_offset: f64,
    pub object_theta: f64,
    /// Lateral half-width of the goal window at the wall, m.
    pub goal_half_width: f64,
    pub align_tolerance: f64,
    /// CoM-to-wall distance allowed, in multiples of the object's half-extent normal to the wall.
    pub wall_distance_factor: f64,
    pub sector_horizon: f64,
    /// Sector margin in multiples of the pusher footprint radius.
    pub sector_margin_factor: f64,
    pub control: ControlBoundsConfig,
    pub duration: f64,
    pub jitter: PushingJitter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushingJitter {
    pub mu_ground: Range,
    pub mu_object: Range,
    pub push_speed: Range,
    pub sway_amplitude: Range,
    pub sway_frequency: Range,
    pub sway_phase: Range,
    pub contact_offset: Range,
    pub object_theta: Range,
}

impl Default for PushingJitter {
    fn default() -> Self {
        Self {
            mu_ground: Range::new(0.25, 0.45),
            mu_object: Range::new(0.3, 0.7),
            push_speed: Range::new(0.08, 0.12),
            sway_amplitude: Range::new(0.0, 0.1),
            sway_frequency: Range::new(0.8, 2.0),
            sway_phase: Range::new(0.0, std::f64::consts::TAU),
            contact_offset: Range::new(-0.015, 0.015),
            object_theta: Range::new(-0.1, 0.1),
        }
    }
}

impl Default for PushingConfig {
    fn default() -> Self {
        Self {
            object: ShapeConfig::Rect {
                width: 0.08,
                height: 0.05,
            },
            object_mass: 0.2,
            pusher: ShapeConfig::Circle { radius: 0.02 },
            wall_y: 0.4,
            mu_ground: 0.35,
            mu_object: 0.5,
            mu_pusher: 0.5,
            mu_wall: 0.3,
            push_speed: 0.1,
            sway_amplitude: 0.0,
            sway_frequency: 1.2,
            sway_phase: 0.0,
            contact_offset: 0.0,
            object_theta: 0.0,
            goal_half_width: 0.08,
            align_tolerance: 0.1,
            wall_distance_factor: 1.2,
            sector_horizon: 1.0,
            sector_margin_factor: 1.5,
            control: ControlBoundsConfig::new(0.5, 0.02),
            duration: 5.0,
            jitter: PushingJitter::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    /// Slope angle, rad.
    pub slope: f64,
    pub cube_size: f64,
    pub cube_mass: f64,
    pub support_length: f64,
    pub support_thickness: f64,
    pub mu_cube: f64,
    pub mu_support: f64,
    /// Initial cube offset along the support, m.
    pub cube_offset: f64,
    /// Peak support acceleration along the slope (positive is uphill), m/s².
    pub accel: f64,
    pub accel_time: f64,
    pub cruise_time: f64,
    pub decel: f64,
    pub support_shrink: f64,
    /// Half-width of the goal window around the planned final support position, m.
    pub goal_half_width: f64,
    pub control: ControlBoundsConfig,
    pub duration: f64,
    pub jitter: BalanceJitter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceJitter {
    pub mu_cube: Range,
    pub cube_offset: Range,
    pub accel: Range,
    pub accel_time: Range,
    pub decel: Range,
}

impl Default for BalanceJitter {
    fn default() -> Self {
        Self {
            mu_cube: Range::new(0.75, 1.2),
            cube_offset: Range::new(-0.015, 0.015),
            accel: Range::new(-2.0, 2.0),
            accel_time: Range::new(0.1, 0.3),
            decel: Range::new(1.0, 4.0),
        }
    }
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            slope: 35f64.to_radians(),
            cube_size: 0.06,
            cube_mass: 0.2,
            support_length: 0.12,
            support_thickness: 0.01,
            mu_cube: 1.0,
            mu_support: 1.0,
            cube_offset: 0.0,
            accel: 1.0,
            accel_time: 0.3,
            cruise_time: 0.3,
            decel: 2.0,
            support_shrink: 0.01,
            goal_half_width: 0.03,
            control: ControlBoundsConfig::new(1.5, 0.05),
            duration: 2.0,
            jitter: BalanceJitter::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopplingConfig {
    pub box_width: f64,
    pub box_height: f64,
    pub box_mass: f64,
    pub mu_table: f64,
    pub mu_box: f64,
    pub mu_finger: f64,
    pub finger_radius: f64,
    pub finger_mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Height of the fingertip contact above the table, m.
    pub push_height: f64,
    /// Anchor speed toward -x, m/s.
    pub anchor_speed: f64,
    /// Anchor travel before it stops, m.
    pub anchor_travel: f64,
    /// Downward anchor speed, m/s.
    pub anchor_sink: f64,
    pub slip_threshold: f64,
    pub goal_angle: f64,
    pub goal_tolerance: f64,
    pub control: ControlBoundsConfig,
    pub duration: f64,
    pub jitter: TopplingJitter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopplingJitter {
    pub mu_table: Range,
    pub push_height: Range,
    pub anchor_speed: Range,
    pub anchor_travel: Range,
    pub anchor_sink: Range,
}

impl Default for TopplingJitter {
    fn default() -> Self {
        Self {
            mu_table: Range::new(0.15, 0.8),
            push_height: Range::new(0.04, 0.095),
            anchor_speed: Range::new(0.12, 0.25),
            anchor_travel: Range::new(0.03, 0.09),
            anchor_sink: Range::new(0.0, 0.05),
        }
    }
}

impl Default for TopplingConfig {
    fn default() -> Self {
        Self {
            box_width: 0.05,
            box_height: 0.1,
            box_mass: 0.1,
            mu_table: 0.5,
            mu_box: 0.8,
            mu_finger: 0.8,
            finger_radius: 0.01,
            finger_mass: 0.05,
            stiffness: 200.0,
            damping: 2.0,
            push_height: 0.08,
            anchor_speed: 0.15,
            anchor_travel: 0.08,
            anchor_sink: 0.0,
            slip_threshold: 0.1,
            goal_angle: std::f64::consts::FRAC_PI_2,
            goal_tolerance: 0.05,
            control: ControlBoundsConfig::new(1.0, 0.03),
            duration: 2.5,
            jitter: TopplingJitter::default(),
        }
    }
}

/// Frictionless disk resting in a narrow U channel; its escape energy is exactly m·g·depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WellConfig {
    pub radius: f64,
    pub mass: f64,
    pub depth: f64,
    /// Clearance between the disk and each channel wall, m.
    pub clearance: f64,
    /// Close the channel with a lid, making escape impossible.
    pub sealed: bool,
    pub control: ControlBoundsConfig,
}

impl Default for WellConfig {
    fn default() -> Self {
        Self {
            radius: 0.05,
            mass: 1.0,
            depth: 0.1,
            clearance: 0.001,
            sealed: false,
            control: ControlBoundsConfig::new(15.0, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Pushing(PushingConfig),
    Balance(BalanceConfig),
    Toppling(TopplingConfig),
    Well(WellConfig),
}

pub const SCENARIO_NAMES: [&str; 4] = ["pushing", "balance", "toppling", "well"];

impl ScenarioConfig {
    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "pushing" => Self::Pushing(PushingConfig::default()),
            "balance" => Self::Balance(BalanceConfig::default()),
            "toppling" => Self::Toppling(TopplingConfig::default()),
            "well" => Self::Well(WellConfig::default()),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pushing(_) => "pushing",
            Self::Balance(_) => "balance",
            Self::Toppling(_) => "toppling",
            Self::Well(_) => "well",
        }
    }

    /// Draws every jittered parameter; the result builds the same world on every call.
    pub fn randomized(&self, rng: &mut ChaCha8Rng) -> Self {
        match self {
            Self::Pushing(c) => {
                let j = &c.jitter;
                Self::Pushing(PushingConfig {
                    mu_ground: j.mu_ground.sample(rng),
                    mu_object: j.mu_object.sample(rng),
                    push_speed: j.push_speed.sample(rng),
                    sway_amplitude: j.sway_amplitude.sample(rng),
                    sway_frequency: j.sway_frequency.sample(rng),
                    sway_phase: j.sway_phase.sample(rng),
                    contact_offset: j.contact_offset.sample(rng),
                    object_theta: j.object_theta.sample(rng),
                    ..c.clone()
                })
            }
            Self::Balance(c) => {
                let j = &c.jitter;
                Self::Balance(BalanceConfig {
                    mu_cube: j.mu_cube.sample(rng),
                    cube_offset: j.cube_offset.sample(rng),
                    accel: j.accel.sample(rng),
                    accel_time: j.accel_time.sample(rng),
                    decel: j.decel.sample(rng),
                    ..c.clone()
                })
            }
            Self::Toppling(c) => {
                let j = &c.jitter;
                Self::Toppling(TopplingConfig {
                    mu_table: j.mu_table.sample(rng),
                    push_height: j.push_height.sample(rng),
                    anchor_speed: j.anchor_speed.sample(rng),
                    anchor_travel: j.anchor_travel.sample(rng),
                    anchor_sink: j.anchor_sink.sample(rng),
                    ..c.clone()
                })
            }
            Self::Well(c) => Self::Well(c.clone()),
        }
    }

    /// Adds `offset` to every friction coefficient, clamping at zero.
    pub fn with_friction_offset(&self, offset: f64) -> Self {
        let add = |mu: f64| (mu + offset).max(0.0);
        let mut out = self.clone();
        match &mut out {
            Self::Pushing(c) => {
                c.mu_ground = add(c.mu_ground);
                c.mu_object = add(c.mu_object);
                c.mu_pusher = add(c.mu_pusher);
                c.mu_wall = add(c.mu_wall);
            }
            Self::Balance(c) => {
                c.mu_cube = add(c.mu_cube);
                c.mu_support = add(c.mu_support);
            }
            Self::Toppling(c) => {
                c.mu_table = add(c.mu_table);
                c.mu_box = add(c.mu_box);
                c.mu_finger = add(c.mu_finger);
            }
            Self::Well(_) => {}
        }
        out
    }

    pub fn control_mut(&mut self) -> &mut ControlBoundsConfig {
        match self {
            Self::Pushing(c) => &mut c.control,
            Self::Balance(c) => &mut c.control,
            Self::Toppling(c) => &mut c.control,
            Self::Well(c) => &mut c.control,
        }
    }
}
