//! Sensor-style noise on recorded datasets.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, EvalError, Frame};
use crate::geometry::{Pose2, Twist2};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Friction,
    Velocity,
    Position,
    Force,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 4] = [
        PerturbationKind::Friction,
        PerturbationKind::Velocity,
        PerturbationKind::Position,
        PerturbationKind::Force,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Friction => "friction",
            Self::Velocity => "velocity",
            Self::Position => "position",
            Self::Force => "force",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown perturbation kind {s:?}"))
    }
}

/// Noise drawn uniformly from [0, e_max] per frame.
///
/// Friction: one offset added to every coefficient. Position and velocity: every
/// component of the object and end-effector, with a random sign; angular velocities use
/// `e_max_angular`. Force: relative change of each contact force component, random sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub e_max: f64,
    #[serde(default)]
    pub e_max_angular: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.e_max) || !ok(self.e_max_angular) {
            return Err(EvalError::Invalid(
                "perturbation bounds must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn signed(rng: &mut ChaCha8Rng, e: f64) -> f64 {
    let u = if e > 0.0 { rng.gen_range(0.0..=e) } else { 0.0 };
    if rng.gen::<bool>() {
        u
    } else {
        -u
    }
}

fn perturb_frame(frame: &mut Frame, spec: &PerturbationSpec, rng: &mut ChaCha8Rng) {
    let e = spec.e_max;
    match spec.kind {
        PerturbationKind::Friction => {
            let mu_e = if e > 0.0 { rng.gen_range(0.0..=e) } else { 0.0 };
            frame.friction_offset += mu_e;
            frame.mu = (frame.mu + mu_e).max(0.0);
            for c in &mut frame.contacts {
                c.mu = (c.mu + mu_e).max(0.0);
            }
        }
        PerturbationKind::Position => {
            let mut shift = |p: &mut Pose2| {
                p.x += signed(rng, e);
                p.y += signed(rng, e);
            };
            shift(&mut frame.z.object_pose);
            shift(&mut frame.z.ee_pose);
        }
        PerturbationKind::Velocity => {
            let ea = spec.e_max_angular;
            let mut shift = |t: &mut Twist2| {
                t.vx += signed(rng, e);
                t.vy += signed(rng, e);
                t.omega += signed(rng, ea);
            };
            shift(&mut frame.z.object_twist);
            shift(&mut frame.z.ee_twist);
        }
        PerturbationKind::Force => {
            for c in &mut frame.contacts {
                c.normal_force = (c.normal_force * (1.0 + signed(rng, e))).max(0.0);
                c.tangent_force *= 1.0 + signed(rng, e);
            }
        }
    }
}

/// Perturbed copy of `dataset`; labels and the original are left untouched.
pub fn perturb_dataset(dataset: &Dataset, spec: &PerturbationSpec) -> Result<Dataset, EvalError> {
    spec.validate()?;
    let mut out = dataset.clone();
    if spec.e_max == 0.0 && spec.e_max_angular == 0.0 {
        return Ok(out);
    }
    for (r, rec) in out.records.iter_mut().enumerate() {
        for (f, frame) in rec.frames.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[r as u64, f as u64]));
            perturb_frame(frame, spec, &mut rng);
        }
    }
    Ok(out)
}
