use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{state_distance, ControlSample, Edge, PlannerConfig, Propagator, Tree};
use crate::geometry::{normalize_angle, Vec2};
use crate::scenarios::{ScenarioSpec, StateBox, SystemState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Est,
    Rrt,
}

impl std::str::FromStr for PlannerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "est" => Ok(Self::Est),
            "rrt" => Ok(Self::Rrt),
            _ => Err(format!("unknown planner {s:?}; expected est or rrt")),
        }
    }
}

/// Goal set of a planner query.
#[derive(Clone, Copy)]
pub enum Goal<'a> {
    None,
    /// Leaving the capture set of the root state.
    Escape,
    Predicate(&'a (dyn Fn(&SystemState) -> bool + Sync)),
}

/// Options beyond the planner config for one growth call.
pub struct GrowOptions<'a> {
    pub kind: PlannerKind,
    pub goal: Goal<'a>,
    pub bounds: StateBox,
    /// Stop once the tree holds this many nodes.
    pub target_nodes: Option<usize>,
    /// After each goal hit with cost c, lower the bound to (1 - delta)·c.
    pub tighten: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrowStats {
    pub iterations: usize,
    /// Final cost bound, lowered by goal hits when tightening.
    pub cost_bound: f64,
    /// Costs of the goal nodes that lowered the bound, in insertion order.
    pub improvements: Vec<f64>,
}

/// Grows an EST tree from `root` for `config.max_iterations` iterations.
pub fn est_grow(
    spec: &ScenarioSpec,
    root: SystemState,
    config: &PlannerConfig,
    goal: Goal,
) -> Tree {
    let opts = GrowOptions {
        kind: PlannerKind::Est,
        goal,
        bounds: spec.kinematic_bounds,
        target_nodes: None,
        tighten: None,
    };
    grow(spec, Tree::new(root), config, &opts).0
}

/// Grows an RRT from `root` for `config.max_iterations` iterations.
pub fn rrt_grow(
    spec: &ScenarioSpec,
    root: SystemState,
    config: &PlannerConfig,
    goal: Goal,
) -> Tree {
    let opts = GrowOptions {
        kind: PlannerKind::Rrt,
        goal,
        bounds: spec.kinematic_bounds,
        target_nodes: None,
        tighten: None,
    };
    grow(spec, Tree::new(root), config, &opts).0
}

/// Resumes growth of `tree`, whose root defines the query.
pub fn grow(
    spec: &ScenarioSpec,
    tree: Tree,
    config: &PlannerConfig,
    opts: &GrowOptions,
) -> (Tree, GrowStats) {
    let root = tree.root().aug.z;
    let escape = move |z: &SystemState| !spec.capture_contains(&root, z);
    let goal: Option<&dyn Fn(&SystemState) -> bool> = match opts.goal {
        Goal::None => None,
        Goal::Escape => Some(&escape),
        Goal::Predicate(p) => Some(p),
    };
    let mut g = Grower {
        spec,
        config,
        prop: Propagator {
            spec,
            bounds: opts.bounds,
            cost_bound: config.cost_bound,
        },
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        goal,
        tree,
        density: None,
    };
    if opts.kind == PlannerKind::Est {
        g.build_density();
    }
    let mut iterations = 0;
    let mut improvements = Vec::new();
    while iterations < config.max_iterations {
        if opts.target_nodes.is_some_and(|n| g.tree.len() >= n) {
            break;
        }
        iterations += 1;
        let step = match opts.kind {
            PlannerKind::Est => g.est_iteration(),
            PlannerKind::Rrt => g.rrt_iteration(),
        };
        match step {
            Step::Stuck => break,
            Step::Inserted(id) if g.tree.nodes[id].goal => {
                if let Some(delta) = opts.tighten {
                    let c = g.tree.nodes[id].aug.c;
                    improvements.push(c);
                    g.lower_bound((1.0 - delta) * c);
                }
            }
            _ => {}
        }
    }
    let stats = GrowStats {
        iterations,
        cost_bound: g.prop.cost_bound,
        improvements,
    };
    (g.tree, stats)
}

enum Step {
    Inserted(usize),
    Rejected,
    Stuck,
}

/// Integer selection weight scale; weights are 2^20 / (1 + density).
const WEIGHT_SCALE: f64 = (1u64 << 20) as f64;

struct Grower<'a, 'g> {
    spec: &'a ScenarioSpec,
    config: &'a PlannerConfig,
    prop: Propagator<'a>,
    rng: ChaCha8Rng,
    goal: Option<&'g dyn Fn(&SystemState) -> bool>,
    tree: Tree,
    density: Option<Density>,
}

impl Grower<'_, '_> {
    fn expandable(&self, id: usize) -> bool {
        let n = &self.tree.nodes[id];
        !n.goal && n.aug.c < self.prop.cost_bound
    }

    fn sample_control(&mut self) -> ControlSample {
        let b = self.spec.control_bounds;
        let mut uni = |m: f64| {
            if m > 0.0 {
                self.rng.gen_range(-m..=m)
            } else {
                0.0
            }
        };
        let fx = uni(b.f_max);
        let fy = uni(b.f_max);
        let torque = uni(b.tau_max);
        ControlSample {
            force: Vec2::new(fx, fy),
            torque,
            duration_steps: self.rng.gen_range(b.min_steps..=b.max_steps),
        }
    }

    fn extend(&self, from: usize, u: &ControlSample) -> Option<Edge> {
        self.prop
            .propagate(&self.tree.nodes[from].aug, u, self.goal)
            .ok()
    }

    fn build_density(&mut self) {
        let mut d = Density::new(self.config);
        for id in 0..self.tree.len() {
            let z = self.tree.nodes[id].aug.z;
            let near = d.neighbors(&self.tree, &z, self.config);
            d.insert(&z, id, near.len());
            d.fenwick.push(0);
            for i in near {
                d.count[i] += 1;
            }
        }
        for id in 0..self.tree.len() {
            let w = if self.expandable(id) {
                d.weight_of(id)
            } else {
                0
            };
            d.fenwick.set(id, w);
        }
        self.density = Some(d);
    }

    fn lower_bound(&mut self, bound: f64) {
        if bound >= self.prop.cost_bound {
            return;
        }
        self.prop.cost_bound = bound;
        if let Some(d) = self.density.as_mut() {
            for (id, n) in self.tree.nodes.iter().enumerate() {
                if n.aug.c >= bound {
                    d.fenwick.set(id, 0);
                }
            }
        }
    }

    fn est_iteration(&mut self) -> Step {
        let d = self.density.as_ref().expect("EST density index");
        let total = d.fenwick.total();
        if total == 0 {
            return Step::Stuck;
        }
        let pick = d.fenwick.find(self.rng.gen_range(0..total));
        let u = self.sample_control();
        let Some(edge) = self.extend(pick, &u) else {
            return Step::Rejected;
        };
        let id = self.tree.push(pick, &edge, u);
        let z = edge.end.z;
        let expandable = self.expandable(id);
        let d = self.density.as_mut().expect("EST density index");
        let near = d.neighbors(&self.tree, &z, self.config);
        d.insert(&z, id, near.len());
        d.fenwick.push(if expandable { d.weight_of(id) } else { 0 });
        for i in near {
            d.count[i] += 1;
            if d.fenwick.get(i) > 0 {
                let w = d.weight_of(i);
                d.fenwick.set(i, w);
            }
        }
        Step::Inserted(id)
    }

    fn sample_target(&mut self) -> SystemState {
        let root = self.tree.root().aug.z;
        let b = &self.prop.bounds;
        let finite = b.x.iter().chain(b.y.iter()).all(|v| v.is_finite());
        // unbounded queries sample a half-meter box around the root
        let bx = if finite {
            *b
        } else {
            let p = root.object_pose.position();
            StateBox {
                x: [p.x - 0.5, p.x + 0.5],
                y: [p.y - 0.5, p.y + 0.5],
                ..*b
            }
        };
        let to_goal = self.goal.is_some() && self.rng.gen::<f64>() < self.config.goal_bias;
        let mut z = bx.sample(&mut self.rng, &root);
        if let (true, Some(g)) = (to_goal, self.goal) {
            for _ in 0..200 {
                if g(&z) {
                    break;
                }
                z = bx.sample(&mut self.rng, &root);
            }
        }
        z.object_pose.theta = normalize_angle(z.object_pose.theta);
        z
    }

    fn rrt_iteration(&mut self) -> Step {
        let target = self.sample_target();
        let w = &self.config.metric_weights;
        let mut nearest = None;
        let mut best = f64::INFINITY;
        for (id, n) in self.tree.nodes.iter().enumerate() {
            if n.goal || n.aug.c >= self.prop.cost_bound {
                continue;
            }
            let d = state_distance(&n.aug.z, &target, w);
            if d < best {
                best = d;
                nearest = Some(id);
            }
        }
        let Some(from) = nearest else {
            return Step::Stuck;
        };
        let mut chosen: Option<(f64, Edge, ControlSample)> = None;
        for _ in 0..self.config.rrt_candidates {
            let u = self.sample_control();
            if let Some(edge) = self.extend(from, &u) {
                let d = state_distance(&edge.end.z, &target, w);
                if chosen.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
                    chosen = Some((d, edge, u));
                }
            }
        }
        match chosen {
            Some((_, edge, u)) => Step::Inserted(self.tree.push(from, &edge, u)),
            None => Step::Rejected,
        }
    }
}

/// Grid index of node positions for neighbor counting, plus selection weights.
struct Density {
    cell: f64,
    w_position: f64,
    w_angle: f64,
    theta_cells: i64,
    grid: HashMap<(i64, i64, i64), Vec<usize>>,
    count: Vec<usize>,
    fenwick: Fenwick,
}

impl Density {
    fn new(config: &PlannerConfig) -> Self {
        let cell = config.est_radius;
        let span = std::f64::consts::TAU * config.metric_weights.angle;
        Self {
            cell,
            w_position: config.metric_weights.position,
            w_angle: config.metric_weights.angle,
            theta_cells: ((span / cell).floor() as i64).max(1),
            grid: HashMap::new(),
            count: Vec::new(),
            fenwick: Fenwick::default(),
        }
    }

    fn key(&self, z: &SystemState) -> (i64, i64, i64) {
        let p = z.object_pose.position();
        let t = (normalize_angle(z.object_pose.theta) + std::f64::consts::PI) * self.w_angle;
        (
            (p.x * self.w_position / self.cell).floor() as i64,
            (p.y * self.w_position / self.cell).floor() as i64,
            ((t / self.cell).floor() as i64).rem_euclid(self.theta_cells),
        )
    }

    /// Existing nodes within the EST radius of `z`.
    fn neighbors(&self, tree: &Tree, z: &SystemState, config: &PlannerConfig) -> Vec<usize> {
        let (kx, ky, kt) = self.key(z);
        let mut thetas: Vec<i64> = (-1..=1)
            .map(|d| (kt + d).rem_euclid(self.theta_cells))
            .collect();
        thetas.sort_unstable();
        thetas.dedup();
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for &t in &thetas {
                    if let Some(ids) = self.grid.get(&(kx + dx, ky + dy, t)) {
                        out.extend(ids.iter().copied().filter(|&i| {
                            state_distance(&tree.nodes[i].aug.z, z, &config.metric_weights)
                                <= config.est_radius
                        }));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn insert(&mut self, z: &SystemState, id: usize, neighbors: usize) {
        let key = self.key(z);
        self.grid.entry(key).or_default().push(id);
        debug_assert_eq!(self.count.len(), id);
        self.count.push(neighbors);
    }

    fn weight_of(&self, id: usize) -> u64 {
        ((WEIGHT_SCALE / (1.0 + self.count[id] as f64)).round() as u64).max(1)
    }
}

/// Fenwick tree over integer weights for proportional sampling.
#[derive(Default)]
struct Fenwick {
    tree: Vec<u64>,
    values: Vec<u64>,
}

impl Fenwick {
    fn push(&mut self, w: u64) {
        let i = self.values.len();
        self.values.push(0);
        // a new slot covers the partial sums of its lower range
        let idx = i + 1;
        let low = idx - (idx & idx.wrapping_neg());
        let mut cover = 0;
        let mut j = idx - 1;
        while j > low {
            cover += self.tree[j - 1];
            j -= j & j.wrapping_neg();
        }
        self.tree.push(cover);
        self.set(i, w);
    }

    fn get(&self, i: usize) -> u64 {
        self.values[i]
    }

    fn set(&mut self, i: usize, w: u64) {
        let old = self.values[i];
        if old == w {
            return;
        }
        self.values[i] = w;
        let mut idx = i + 1;
        while idx <= self.tree.len() {
            self.tree[idx - 1] = self.tree[idx - 1] - old + w;
            idx += idx & idx.wrapping_neg();
        }
    }

    fn total(&self) -> u64 {
        let mut idx = self.tree.len();
        let mut s = 0;
        while idx > 0 {
            s += self.tree[idx - 1];
            idx -= idx & idx.wrapping_neg();
        }
        s
    }

    /// Index whose cumulative weight range contains `target` (< total).
    fn find(&self, mut target: u64) -> usize {
        let n = self.tree.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= target {
                target -= self.tree[next - 1];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}
