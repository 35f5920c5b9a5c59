//! Robustness scores: effort of escape, capture/success scores from an energy cost field,
//! and the contact-force baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::ContactPoint;
use crate::planner::{
    grow, prune, EscapePath, Goal, GrowOptions, PlannerConfig, PlannerKind, Tree,
};
use crate::scenarios::{ScenarioSpec, StateBox, SystemState};
use crate::seed::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EscapeConfig {
    pub planner_kind: PlannerKind,
    /// Bound-lowering rounds after the first escape is found.
    pub rounds: usize,
    /// Planner iterations per round.
    pub budget: usize,
    /// Each round looks for a path cheaper than (1 - delta) times the current bound.
    pub delta: f64,
    pub planner: PlannerConfig,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        Self {
            planner_kind: PlannerKind::Rrt,
            rounds: 10,
            budget: 2000,
            delta: 0.01,
            planner: PlannerConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeResult {
    /// Escape effort in J; infinite when no escape was found.
    #[serde(with = "crate::serde_inf")]
    pub effort: f64,
    pub path: Option<EscapePath>,
    /// Strictly decreasing costs of successive improving escapes.
    pub bound_history: Vec<f64>,
    pub iterations_used: usize,
}

/// Minimal external work to leave the capture set of `z_init`, found by repeatedly
/// regrowing a cost-bounded tree under a shrinking bound.
pub fn effort_of_escape(
    spec: &ScenarioSpec,
    z_init: &SystemState,
    config: &EscapeConfig,
    seed: u64,
) -> EscapeResult {
    if !spec.capture_contains(z_init, z_init) {
        return EscapeResult {
            effort: 0.0,
            path: None,
            bound_history: Vec::new(),
            iterations_used: 0,
        };
    }
    let opts = GrowOptions {
        kind: config.planner_kind,
        goal: Goal::Escape,
        bounds: spec.kinematic_bounds,
        target_nodes: None,
        tighten: Some(config.delta),
    };
    let mut cfg = PlannerConfig {
        max_iterations: config.budget,
        cost_bound: f64::INFINITY,
        rng_seed: derive_seed(seed, &[0]),
        ..config.planner.clone()
    };
    let (mut tree, stats) = grow(spec, Tree::new(*z_init), &cfg, &opts);
    let mut iterations_used = stats.iterations;
    let Some(first) = tree.best_goal() else {
        return EscapeResult {
            effort: f64::INFINITY,
            path: None,
            bound_history: Vec::new(),
            iterations_used,
        };
    };
    let mut best = first.aug.c;
    let mut path = tree.escape_path(first.id);
    let mut history = stats.improvements;
    for round in 1..=config.rounds {
        let bound = (1.0 - config.delta) * best;
        tree = prune(&tree, bound);
        cfg.cost_bound = bound;
        cfg.rng_seed = derive_seed(seed, &[round as u64]);
        let (grown, stats) = grow(spec, tree, &cfg, &opts);
        tree = grown;
        iterations_used += stats.iterations;
        if let Some(g) = tree.best_goal() {
            if g.aug.c < bound {
                best = g.aug.c;
                path = tree.escape_path(g.id);
                history.extend(stats.improvements);
            }
        }
    }
    EscapeResult {
        effort: best,
        path: Some(path),
        bound_history: history,
        iterations_used,
    }
}

/// Sampled states with their cost-to-come; sample 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyCostField {
    pub root: SystemState,
    pub samples: Vec<(SystemState, f64)>,
}

impl EnergyCostField {
    pub fn from_tree(tree: &Tree) -> Self {
        Self {
            root: tree.root().aug.z,
            samples: tree.nodes.iter().map(|n| (n.aug.z, n.aug.c)).collect(),
        }
    }

    pub fn costs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }
}

/// Grows an unbounded, goal-free EST tree of `m` nodes (root included) from `z_init`.
///
/// Growth stops early after 20·m iterations if extensions keep failing.
pub fn energy_cost_field(
    spec: &ScenarioSpec,
    z_init: &SystemState,
    m: usize,
    planner: &PlannerConfig,
    seed: u64,
) -> EnergyCostField {
    let m = m.max(1);
    let cfg = PlannerConfig {
        max_iterations: 20 * m,
        cost_bound: f64::INFINITY,
        rng_seed: seed,
        ..planner.clone()
    };
    let opts = GrowOptions {
        kind: PlannerKind::Est,
        goal: Goal::None,
        bounds: StateBox::unbounded(),
        target_nodes: Some(m),
        tighten: None,
    };
    let (tree, _) = grow(spec, Tree::new(*z_init), &cfg, &opts);
    EnergyCostField::from_tree(&tree)
}

/// Softmax masses exp(-λ(c - c_min)), normalized.
pub fn likelihoods(costs: &[f64], lambda: f64) -> Vec<f64> {
    if costs.is_empty() {
        return Vec::new();
    }
    let c_min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = costs
        .iter()
        .map(|c| (-lambda * (c - c_min)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureScores {
    pub omega_cap: f64,
    pub omega_suc: f64,
}

pub fn capture_scores(
    spec: &ScenarioSpec,
    z_init: &SystemState,
    field: &EnergyCostField,
    lambda: f64,
) -> CaptureScores {
    let masses = likelihoods(&field.costs(), lambda);
    let mut omega_cap = 0.0;
    let mut omega_suc = 0.0;
    for ((z, _), m) in field.samples.iter().zip(&masses) {
        if spec.capture_contains(z_init, z) {
            omega_cap += m;
        }
        if spec.success_contains(z) {
            omega_suc += m;
        }
    }
    CaptureScores {
        omega_cap: omega_cap.clamp(0.0, 1.0),
        omega_suc: omega_suc.clamp(0.0, 1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceWeights {
    pub engage: f64,
    pub stick: f64,
    pub dist: f64,
    /// Length scale of the clearance term, m.
    pub d0: f64,
}

impl Default for ForceWeights {
    fn default() -> Self {
        Self {
            engage: 0.1,
            stick: 1.0,
            dist: 1.0,
            d0: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForceScoreInput {
    /// Object/end-effector contacts.
    pub contacts: Vec<ContactPoint>,
    pub mu: f64,
    pub min_distance: f64,
}

/// Margin of a contact force from the friction cone edge.
pub fn sticking_margin(mu: f64, normal: f64, tangent: f64) -> f64 {
    (mu * normal - tangent.abs()) * mu.atan().cos()
}

/// Weighted sum of normal force, friction-cone margin and a clearance term.
pub fn force_score(input: &ForceScoreInput, w: &ForceWeights) -> f64 {
    let engage = input
        .contacts
        .iter()
        .map(|c| c.normal_force)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        .unwrap_or(0.0);
    let stick = input
        .contacts
        .iter()
        .map(|c| sticking_margin(input.mu, c.normal_force, c.tangent_force))
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        .unwrap_or(0.0);
    w.engage * engage + w.stick * stick + w.dist * (-input.min_distance.max(0.0) / w.d0).exp()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("k_bar must be at least 1")]
    ZeroWindow,
    #[error("k_bar = {k_bar} exceeds the {len} available frames")]
    WindowTooLong { k_bar: usize, len: usize },
}

/// Weighted mean of the first `k_bar` scores with weights k / (1 + ... + k_bar).
pub fn trajectory_success_score(scores: &[f64], k_bar: usize) -> Result<f64, ScoreError> {
    if k_bar == 0 {
        return Err(ScoreError::ZeroWindow);
    }
    if k_bar > scores.len() {
        return Err(ScoreError::WindowTooLong {
            k_bar,
            len: scores.len(),
        });
    }
    let norm = (k_bar * (k_bar + 1)) as f64 / 2.0;
    Ok(scores[..k_bar]
        .iter()
        .enumerate()
        .map(|(i, s)| (i + 1) as f64 * s)
        .sum::<f64>()
        / norm)
}
