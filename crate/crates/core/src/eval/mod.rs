//! Datasets of scripted trajectories, ground-truth labels, ranking statistics,
//! perturbation of recorded data and the scoring study.

mod io;
mod perturb;
mod scoring;
mod stats;
mod study;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{min_body_distance, ContactPoint};
use crate::scenarios::{make_scenario, Rollout, ScenarioConfig, ScenarioSpec, SystemState};
use crate::seed::derive_seed;

pub use io::{
    format_score_row, parse_score_csv, read_dataset, read_dataset_str, write_dataset,
    write_records, SCORE_HEADER,
};
pub use perturb::{perturb_dataset, PerturbationKind, PerturbationSpec};
pub use scoring::{
    score_records, trajectory_scores, Metric, ScoreRequest, ScoreRow, ScoreSettings, ALL_METRICS,
};
pub use stats::{auc, average_precision, median};
pub use study::{
    run_study, Curve, CurvePoint, MSweepConfig, PerturbStudyConfig, Report, StudyConfig, TableRow,
    TimingRow,
};

/// Construction attempts per trajectory before generation gives up.
const MAX_ATTEMPTS: u64 = 8;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Invalid(String),
    #[error("{context}: need at least one positive and one negative label")]
    DegenerateLabels { context: String },
    #[error("trajectory {id}: {msg}")]
    Trajectory { id: String, msg: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One recorded state of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Simulator step of the state.
    pub k: usize,
    pub z: SystemState,
    /// Object/end-effector contacts during the step that produced the state.
    #[serde(default)]
    pub contacts: Vec<ContactPoint>,
    #[serde(with = "crate::serde_inf")]
    pub min_distance: f64,
    pub mu: f64,
    /// Shift applied to every friction coefficient of the world when scoring this frame.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub friction_offset: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Inputs that regenerate a record exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySource {
    pub config: ScenarioConfig,
    pub controller_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub id: String,
    pub scenario: String,
    pub frames: Vec<Frame>,
    pub success_label: bool,
    pub captured_labels: Vec<bool>,
    /// Absent for trajectories recorded outside this crate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<TrajectorySource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub n_traj: usize,
    pub k_frames: usize,
    /// Extra recorded frames that must stay captured for a frame to count as captured.
    pub k_hat: usize,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_traj: 50,
            k_frames: 10,
            k_hat: 3,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_traj == 0 {
            return Err(EvalError::Invalid("n_traj must be at least 1".into()));
        }
        if self.k_frames < 2 {
            return Err(EvalError::Invalid("k_frames must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub scenario: ScenarioConfig,
    pub generation: GenerationConfig,
    pub records: Vec<TrajectoryRecord>,
}

/// `k` evenly spaced step indices from 0 to `horizon`, rounded to the nearest step.
pub fn frame_indices(horizon: usize, k: usize) -> Vec<usize> {
    let d = k - 1;
    (0..k).map(|j| (2 * j * horizon + d) / (2 * d)).collect()
}

/// Frame `j` is captured when frames `j..=j + k_hat` all lie in their own capture sets;
/// windows running past the end are truncated.
pub fn label_window(membership: &[bool], k_hat: usize) -> Vec<bool> {
    let n = membership.len();
    (0..n)
        .map(|j| membership[j..n.min(j + k_hat + 1)].iter().all(|&m| m))
        .collect()
}

pub fn capture_membership(spec: &ScenarioSpec, frames: &[Frame]) -> Vec<bool> {
    frames
        .iter()
        .map(|f| spec.capture_contains(&f.z, &f.z))
        .collect()
}

pub fn label_captured(record: &TrajectoryRecord, spec: &ScenarioSpec, k_hat: usize) -> Vec<bool> {
    label_window(&capture_membership(spec, &record.frames), k_hat)
}

/// Records the state at step `k` of a rollout with its end-effector contact data.
pub fn frame_at(spec: &ScenarioSpec, rollout: &Rollout, k: usize) -> Frame {
    let z = rollout.states[k];
    let (contacts, min_distance) = match spec.ee {
        Some(e) => {
            let contacts = rollout
                .reports
                .get(k.saturating_sub(1))
                .map(|r| r.contacts_between(spec.object, e).cloned().collect())
                .unwrap_or_default();
            let ws = spec.to_world_state(&z);
            (
                contacts,
                min_body_distance(&spec.world, &ws, spec.object, e),
            )
        }
        None => (Vec::new(), f64::INFINITY),
    };
    Frame {
        k,
        z,
        contacts,
        min_distance,
        mu: spec.contact_mu,
        friction_offset: 0.0,
    }
}

/// Runs the scripted controller of `config` and records `k_frames` evenly spaced frames.
pub fn simulate_record(
    id: &str,
    config: &ScenarioConfig,
    controller_seed: u64,
    k_frames: usize,
    k_hat: usize,
) -> Result<TrajectoryRecord, EvalError> {
    let fail = |msg: String| EvalError::Trajectory {
        id: id.to_string(),
        msg,
    };
    let spec = make_scenario(config).map_err(|e| fail(e.to_string()))?;
    if spec.horizon_steps + 1 < k_frames {
        return Err(fail(format!(
            "{} steps cannot hold {k_frames} distinct frames",
            spec.horizon_steps
        )));
    }
    let rollout = spec
        .rollout(controller_seed)
        .map_err(|e| fail(e.to_string()))?;
    let frames: Vec<Frame> = frame_indices(spec.horizon_steps, k_frames)
        .into_iter()
        .map(|k| frame_at(&spec, &rollout, k))
        .collect();
    let success_label = spec.success_contains(&frames[frames.len() - 1].z);
    let captured_labels = label_window(&capture_membership(&spec, &frames), k_hat);
    Ok(TrajectoryRecord {
        id: id.to_string(),
        scenario: config.name().to_string(),
        frames,
        success_label,
        captured_labels,
        source: Some(TrajectorySource {
            config: config.clone(),
            controller_seed,
        }),
    })
}

/// Trajectory `index` of a dataset: a randomized config, redrawn when it cannot be built
/// or simulated.
fn generate_record(
    base: &ScenarioConfig,
    gen: &GenerationConfig,
    index: usize,
) -> Result<TrajectoryRecord, EvalError> {
    let id = format!("{}-{index:04}", base.name());
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let path = [index as u64, attempt];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(gen.seed, &path));
        let config = base.randomized(&mut rng);
        let controller_seed = derive_seed(gen.seed, &[index as u64, attempt, 1]);
        match simulate_record(&id, &config, controller_seed, gen.k_frames, gen.k_hat) {
            Ok(r) => return Ok(r),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Generates `n_traj` labeled trajectories; the result depends only on the arguments.
pub fn generate_dataset(
    scenario: &ScenarioConfig,
    gen: &GenerationConfig,
) -> Result<Dataset, EvalError> {
    gen.validate()?;
    let records = (0..gen.n_traj)
        .into_par_iter()
        .map(|i| generate_record(scenario, gen, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        scenario: scenario.clone(),
        generation: gen.clone(),
        records,
    })
}

#[cfg(test)]
mod tests;
