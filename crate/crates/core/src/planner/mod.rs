//! Kinodynamic tree planners over the cost-augmented state space.
//!
//! Edges are simulator rollouts under a constant object wrench. Every node stores the
//! accumulated absolute external work from the root (its cost-to-come).

mod grow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{SimError, Wrench};
use crate::energy::{cost_increment, mechanical_energy};
use crate::geometry::{angle_diff, Vec2};
use crate::scenarios::{EeCommand, ScenarioSpec, StateBox, SystemState};

pub use grow::{est_grow, grow, rrt_grow, Goal, GrowOptions, GrowStats, PlannerKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub z: SystemState,
    /// Cost-to-come, J.
    pub c: f64,
}

/// Constant object wrench held for a number of simulator steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSample {
    pub force: Vec2,
    pub torque: f64,
    pub duration_steps: usize,
}

impl ControlSample {
    pub fn wrench(&self) -> Wrench {
        Wrench::new(self.force.x, self.force.y, self.torque)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub aug: AugmentedState,
    pub incoming_control: Option<ControlSample>,
    /// Node lies in the goal set; goal nodes are never expanded.
    #[serde(default)]
    pub goal: bool,
}

/// Per-component weights of the state distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricWeights {
    /// Per meter of object position.
    pub position: f64,
    /// Per radian of object orientation.
    pub angle: f64,
    /// Per m/s of object velocity.
    pub velocity: f64,
    /// Per rad/s of object angular velocity.
    pub angular_velocity: f64,
    /// Per meter of end-effector position.
    pub ee_position: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            position: 1.0,
            angle: 0.3,
            velocity: 0.2,
            angular_velocity: 0.05,
            ee_position: 0.5,
        }
    }
}

impl MetricWeights {
    fn is_valid(&self) -> bool {
        [
            self.position,
            self.angle,
            self.velocity,
            self.angular_velocity,
            self.ee_position,
        ]
        .iter()
        .all(|w| w.is_finite() && *w > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub metric_weights: MetricWeights,
    /// Neighborhood radius of the EST density estimate, in weighted-metric units.
    pub est_radius: f64,
    /// Probability of steering toward a goal sample (RRT only).
    pub goal_bias: f64,
    pub max_iterations: usize,
    /// Nodes must cost strictly less than this; infinite means unbounded.
    #[serde(with = "crate::serde_inf")]
    pub cost_bound: f64,
    /// Candidate controls tried per RRT extension.
    pub rrt_candidates: usize,
    pub rng_seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            metric_weights: MetricWeights::default(),
            est_radius: 0.02,
            goal_bias: 0.05,
            max_iterations: 2000,
            cost_bound: f64::INFINITY,
            rrt_candidates: 8,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if !self.metric_weights.is_valid() {
            return Err(PlannerError::InvalidConfig(
                "metric weights must be positive and finite".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(PlannerError::InvalidConfig(
                "goal_bias must lie in [0, 1]".into(),
            ));
        }
        if !(self.est_radius.is_finite() && self.est_radius > 0.0) {
            return Err(PlannerError::InvalidConfig(
                "est_radius must be positive".into(),
            ));
        }
        if self.cost_bound.is_nan() || self.cost_bound < 0.0 {
            return Err(PlannerError::InvalidConfig(
                "cost_bound must be non-negative".into(),
            ));
        }
        if self.rrt_candidates == 0 {
            return Err(PlannerError::InvalidConfig(
                "rrt_candidates must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Weighted Euclidean distance over object pose and twist and end-effector position.
pub fn state_distance(a: &SystemState, b: &SystemState, w: &MetricWeights) -> f64 {
    let dp = a.object_pose.position() - b.object_pose.position();
    let da = angle_diff(a.object_pose.theta, b.object_pose.theta);
    let dv = a.object_twist.linear() - b.object_twist.linear();
    let dw = a.object_twist.omega - b.object_twist.omega;
    let de = a.ee_pose.position() - b.ee_pose.position();
    (w.position * w.position * dp.norm_sq()
        + w.angle * w.angle * da * da
        + w.velocity * w.velocity * dv.norm_sq()
        + w.angular_velocity * w.angular_velocity * dw * dw
        + w.ee_position * w.ee_position * de.norm_sq())
    .sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Violation {
    #[error("bounds violation at step {0}")]
    Bounds(usize),
    #[error("cost bound exceeded at step {0}")]
    CostBound(usize),
    #[error("tunneling: {0}")]
    Tunneling(String),
    #[error("simulation error: {0}")]
    Sim(String),
    #[error("control outside bounds")]
    ControlOutOfBounds,
}

impl From<SimError> for Violation {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Tunneling { .. } => Violation::Tunneling(e.to_string()),
            other => Violation::Sim(other.to_string()),
        }
    }
}

/// Result of a valid extension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub end: AugmentedState,
    /// Steps actually simulated; shorter than requested when the goal was crossed.
    pub steps: usize,
    pub reached_goal: bool,
}

/// Integration context for one planner query.
pub struct Propagator<'a> {
    pub spec: &'a ScenarioSpec,
    pub bounds: StateBox,
    pub cost_bound: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(spec: &'a ScenarioSpec) -> Self {
        Self {
            spec,
            bounds: spec.kinematic_bounds,
            cost_bound: f64::INFINITY,
        }
    }

    /// Applies `u` to the object for its duration, holding the end-effector to its policy.
    ///
    /// With a goal predicate, the edge stops at the first step whose state satisfies it.
    pub fn propagate(
        &self,
        from: &AugmentedState,
        u: &ControlSample,
        goal: Option<&dyn Fn(&SystemState) -> bool>,
    ) -> Result<Edge, Violation> {
        let spec = self.spec;
        let cb = spec.control_bounds;
        if u.force.x.abs() > cb.f_max * (1.0 + 1e-12)
            || u.force.y.abs() > cb.f_max * (1.0 + 1e-12)
            || u.torque.abs() > cb.tau_max * (1.0 + 1e-12)
            || u.duration_steps == 0
        {
            return Err(Violation::ControlOutOfBounds);
        }
        let cmd = EeCommand {
            twist: from.z.ee_twist,
            anchor_velocity: Vec2::ZERO,
        };
        let wrench = u.wrench();
        let mut ws = spec.to_world_state(&from.z);
        let mut e0 = mechanical_energy(&spec.world, &ws, spec.datum_height).total;
        let mut c = from.c;
        for k in 0..u.duration_steps {
            let (next, report) = spec.advance(&ws, &cmd, wrench)?;
            let e1 = mechanical_energy(&spec.world, &next, spec.datum_height).total;
            c += cost_increment(e0, e1, &report).d_work_ext_abs;
            e0 = e1;
            ws = next;
            let z = spec.from_world_state(&ws);
            if !z.is_finite() {
                return Err(Violation::Sim("non-finite state".into()));
            }
            if c >= self.cost_bound {
                return Err(Violation::CostBound(k + 1));
            }
            if goal.is_some_and(|g| g(&z)) {
                return Ok(Edge {
                    end: AugmentedState { z, c },
                    steps: k + 1,
                    reached_goal: true,
                });
            }
            if !self.bounds.contains(&z) {
                return Err(Violation::Bounds(k + 1));
            }
        }
        Ok(Edge {
            end: AugmentedState {
                z: spec.from_world_state(&ws),
                c,
            },
            steps: u.duration_steps,
            reached_goal: false,
        })
    }
}

/// Convenience wrapper with the scenario's kinematic bounds and no cost bound or goal.
pub fn propagate(
    spec: &ScenarioSpec,
    from: &AugmentedState,
    u: &ControlSample,
) -> Result<AugmentedState, Violation> {
    Propagator::new(spec)
        .propagate(from, u, None)
        .map(|e| e.end)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn new(root: SystemState) -> Self {
        Self {
            nodes: vec![TreeNode {
                id: 0,
                parent: None,
                aug: AugmentedState { z: root, c: 0.0 },
                incoming_control: None,
                goal: false,
            }],
        }
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, parent: usize, edge: &Edge, u: ControlSample) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            id,
            parent: Some(parent),
            aug: edge.end,
            incoming_control: Some(ControlSample {
                duration_steps: edge.steps,
                ..u
            }),
            goal: edge.reached_goal,
        });
        id
    }

    pub fn goal_nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.goal)
    }

    /// Cheapest goal node, ties going to the earliest id.
    pub fn best_goal(&self) -> Option<&TreeNode> {
        self.goal_nodes()
            .fold(None, |best: Option<&TreeNode>, n| match best {
                Some(b) if b.aug.c <= n.aug.c => Some(b),
                _ => Some(n),
            })
    }

    /// Node ids from the root to `id`.
    pub fn path_to(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn escape_path(&self, id: usize) -> EscapePath {
        let ids = self.path_to(id);
        EscapePath {
            nodes: ids.iter().map(|&i| self.nodes[i].clone()).collect(),
            cost: self.nodes[id].aug.c,
        }
    }
}

/// Root-to-goal node sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapePath {
    pub nodes: Vec<TreeNode>,
    pub cost: f64,
}

/// Drops every node costing `c_bound` or more, with its descendants; the root stays.
pub fn prune(tree: &Tree, c_bound: f64) -> Tree {
    let mut remap = vec![usize::MAX; tree.nodes.len()];
    let mut nodes = Vec::with_capacity(tree.nodes.len());
    for (i, n) in tree.nodes.iter().enumerate() {
        let keep = match n.parent {
            None => true,
            // parents always precede children
            Some(p) => remap[p] != usize::MAX && n.aug.c < c_bound,
        };
        if keep {
            remap[i] = nodes.len();
            let mut m = n.clone();
            m.id = nodes.len();
            m.parent = n.parent.map(|p| remap[p]);
            nodes.push(m);
        }
    }
    Tree { nodes }
}

/// Re-simulates the path to `id` and returns its recomputed cost-to-come.
pub fn replay_cost(spec: &ScenarioSpec, tree: &Tree, id: usize) -> Result<f64, Violation> {
    let mut prop = Propagator::new(spec);
    prop.bounds = StateBox::unbounded();
    let path = tree.path_to(id);
    let mut aug = tree.nodes[path[0]].aug;
    for &i in &path[1..] {
        let u = tree.nodes[i]
            .incoming_control
            .expect("non-root nodes carry their control");
        aug = prop.propagate(&aug, &u, None)?.end;
    }
    Ok(aug.c)
}
