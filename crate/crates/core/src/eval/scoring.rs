//! Per-frame scoring of recorded trajectories.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalError, Frame, TrajectoryRecord};
use crate::metrics::{
    capture_scores, effort_of_escape, energy_cost_field, force_score, trajectory_success_score,
    EscapeConfig, ForceScoreInput, ForceWeights,
};
use crate::planner::{PlannerConfig, PlannerKind};
use crate::scenarios::{make_scenario, ScenarioConfig, ScenarioSpec};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    OmegaCap,
    OmegaEscEst,
    OmegaEscRrt,
    OmegaForce,
    OmegaSuc,
}

pub const ALL_METRICS: [Metric; 5] = [
    Metric::OmegaCap,
    Metric::OmegaEscEst,
    Metric::OmegaEscRrt,
    Metric::OmegaForce,
    Metric::OmegaSuc,
];

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Self::OmegaCap => "omega_cap",
            Self::OmegaEscEst => "omega_esc_est",
            Self::OmegaEscRrt => "omega_esc_rrt",
            Self::OmegaForce => "omega_force",
            Self::OmegaSuc => "omega_suc",
        }
    }

    /// Trajectory-level metrics are judged against success labels, the rest against
    /// captured labels.
    pub fn is_trajectory_level(self) -> bool {
        self == Self::OmegaSuc
    }

    fn code(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ALL_METRICS
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = ALL_METRICS.iter().map(|m| m.name()).collect();
                format!("unknown metric {s:?}; valid metrics: {}", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSettings {
    /// Softmax sharpness, 1/J.
    pub lambda: f64,
    /// Energy cost field size.
    pub m: usize,
    /// Frames averaged into the trajectory-level success score.
    pub k_bar: usize,
    pub planner: PlannerConfig,
    /// Settings of both escape metrics; the planner kind is set per metric.
    pub escape: EscapeConfig,
    pub force: ForceWeights,
}

impl Default for ScoreSettings {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            m: 100,
            k_bar: 5,
            planner: PlannerConfig::default(),
            escape: EscapeConfig::default(),
            force: ForceWeights::default(),
        }
    }
}

impl ScoreSettings {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Invalid(m.into()));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if self.k_bar == 0 {
            return bad("k_bar must be at least 1");
        }
        if !(self.force.d0.is_finite() && self.force.d0 > 0.0) {
            return bad("force.d0 must be positive");
        }
        if !(0.0..1.0).contains(&self.escape.delta) {
            return bad("escape.delta must lie in [0, 1)");
        }
        self.planner
            .validate()
            .and(self.escape.planner.validate())
            .map_err(|e| EvalError::Invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub scenario: String,
    pub traj_id: String,
    pub frame: usize,
    pub metric: Metric,
    pub value: f64,
    pub label: bool,
}

/// What to score and how.
pub struct ScoreRequest<'a> {
    pub metrics: &'a [Metric],
    pub settings: &'a ScoreSettings,
    pub seed: u64,
    /// Score only the first frames of each record.
    pub frame_limit: Option<usize>,
    /// Scenario of records that carry no source config; defaults by scenario name.
    pub fallback: Option<&'a ScenarioConfig>,
    /// Dataset index of the first record, so seeds do not depend on batching.
    pub first_index: usize,
}

enum Job {
    Field,
    Escape(PlannerKind),
    Force,
}

pub(crate) fn record_config(
    rec: &TrajectoryRecord,
    fallback: Option<&ScenarioConfig>,
) -> Result<ScenarioConfig, EvalError> {
    if let Some(s) = &rec.source {
        return Ok(s.config.clone());
    }
    if let Some(f) = fallback.filter(|f| f.name() == rec.scenario) {
        return Ok(f.clone());
    }
    ScenarioConfig::default_for(&rec.scenario).ok_or_else(|| EvalError::Trajectory {
        id: rec.id.clone(),
        msg: format!("unknown scenario {:?}", rec.scenario),
    })
}

/// Scenario rebuilt with the frame's friction offset, when it has one.
fn frame_spec(config: &ScenarioConfig, frame: &Frame) -> Result<Option<ScenarioSpec>, String> {
    if frame.friction_offset == 0.0 {
        return Ok(None);
    }
    make_scenario(&config.with_friction_offset(frame.friction_offset))
        .map(Some)
        .map_err(|e| e.to_string())
}

/// A row keyed by (record index, frame index) for ordering.
type KeyedRow = ((usize, usize), ScoreRow);

/// Scores every frame of `records` for the requested metrics in parallel, skipping
/// (trajectory id, frame, metric) triples for which `skip` holds.
///
/// Rows come back ordered by record, frame and metric regardless of scheduling; each
/// work item draws from its own seed.
pub fn score_records(
    records: &[TrajectoryRecord],
    req: &ScoreRequest,
    skip: &(dyn Fn(&str, usize, Metric) -> bool + Sync),
) -> Result<Vec<ScoreRow>, EvalError> {
    req.settings.validate()?;
    let wants = |m: Metric| req.metrics.contains(&m);
    let configs = records
        .iter()
        .map(|r| record_config(r, req.fallback))
        .collect::<Result<Vec<_>, _>>()?;
    let specs = configs
        .par_iter()
        .zip(records)
        .map(|(c, r)| {
            make_scenario(c).map_err(|e| EvalError::Trajectory {
                id: r.id.clone(),
                msg: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut jobs = Vec::new();
    for (ri, rec) in records.iter().enumerate() {
        if rec.captured_labels.len() != rec.frames.len() {
            return Err(EvalError::Trajectory {
                id: rec.id.clone(),
                msg: "captured_labels and frames differ in length".into(),
            });
        }
        let n = req
            .frame_limit
            .map_or(rec.frames.len(), |l| l.min(rec.frames.len()));
        for fi in 0..n {
            let todo = |m: Metric| wants(m) && !skip(&rec.id, fi, m);
            if todo(Metric::OmegaCap) || todo(Metric::OmegaSuc) {
                jobs.push((ri, fi, Job::Field));
            }
            if todo(Metric::OmegaEscEst) {
                jobs.push((ri, fi, Job::Escape(PlannerKind::Est)));
            }
            if todo(Metric::OmegaEscRrt) {
                jobs.push((ri, fi, Job::Escape(PlannerKind::Rrt)));
            }
            if todo(Metric::OmegaForce) {
                jobs.push((ri, fi, Job::Force));
            }
        }
    }

    let s = req.settings;
    let rows = jobs
        .par_iter()
        .map(|(ri, fi, job)| -> Result<Vec<KeyedRow>, EvalError> {
            let rec = &records[*ri];
            let frame = &rec.frames[*fi];
            let own = frame_spec(&configs[*ri], frame).map_err(|msg| EvalError::Trajectory {
                id: rec.id.clone(),
                msg,
            })?;
            let spec = own.as_ref().unwrap_or(&specs[*ri]);
            let row = |metric: Metric, value: f64| ScoreRow {
                scenario: rec.scenario.clone(),
                traj_id: rec.id.clone(),
                frame: *fi,
                metric,
                value,
                label: if metric.is_trajectory_level() {
                    rec.success_label
                } else {
                    rec.captured_labels[*fi]
                },
            };
            let seed_for = |m: Metric| {
                derive_seed(
                    req.seed,
                    &[(req.first_index + *ri) as u64, *fi as u64, m.code()],
                )
            };
            let rows = match job {
                Job::Field => {
                    let field = energy_cost_field(
                        spec,
                        &frame.z,
                        s.m,
                        &s.planner,
                        seed_for(Metric::OmegaCap),
                    );
                    let sc = capture_scores(spec, &frame.z, &field, s.lambda);
                    let mut out = Vec::new();
                    if wants(Metric::OmegaCap) && !skip(&rec.id, *fi, Metric::OmegaCap) {
                        out.push(row(Metric::OmegaCap, sc.omega_cap));
                    }
                    if wants(Metric::OmegaSuc) && !skip(&rec.id, *fi, Metric::OmegaSuc) {
                        out.push(row(Metric::OmegaSuc, sc.omega_suc));
                    }
                    out
                }
                Job::Escape(kind) => {
                    let metric = match kind {
                        PlannerKind::Est => Metric::OmegaEscEst,
                        PlannerKind::Rrt => Metric::OmegaEscRrt,
                    };
                    let cfg = EscapeConfig {
                        planner_kind: *kind,
                        ..s.escape.clone()
                    };
                    let r = effort_of_escape(spec, &frame.z, &cfg, seed_for(metric));
                    vec![row(metric, r.effort)]
                }
                Job::Force => {
                    let input = ForceScoreInput {
                        contacts: frame.contacts.clone(),
                        mu: frame.mu,
                        min_distance: frame.min_distance,
                    };
                    vec![row(Metric::OmegaForce, force_score(&input, &s.force))]
                }
            };
            Ok(rows.into_iter().map(|r| ((*ri, *fi), r)).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows: Vec<_> = rows.into_iter().flatten().collect();
    rows.sort_by_key(|(key, r)| (*key, r.metric));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Trajectory-level success score of each record from its per-frame omega_suc rows.
///
/// Returns (trajectory id, score, success label) in record order; records with fewer
/// than `k_bar` scored frames are an error.
pub fn trajectory_scores(
    records: &[TrajectoryRecord],
    rows: &[ScoreRow],
    k_bar: usize,
) -> Result<Vec<(String, f64, bool)>, EvalError> {
    records
        .iter()
        .map(|rec| {
            let mut per_frame: Vec<(usize, f64)> = rows
                .iter()
                .filter(|r| r.metric == Metric::OmegaSuc && r.traj_id == rec.id)
                .map(|r| (r.frame, r.value))
                .collect();
            per_frame.sort_by_key(|p| p.0);
            let values: Vec<f64> = per_frame.into_iter().map(|p| p.1).collect();
            let score =
                trajectory_success_score(&values, k_bar).map_err(|e| EvalError::Trajectory {
                    id: rec.id.clone(),
                    msg: e.to_string(),
                })?;
            Ok((rec.id.clone(), score, rec.success_label))
        })
        .collect()
}
