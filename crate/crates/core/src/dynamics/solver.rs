use super::{
    combined_mu, ContactPoint, MotionKind, SimError, StepReport, World, WorldState, Wrench,
};
use crate::geometry::{collide, cross_sv, Placed, Pose2, Twist2, Vec2};

/// Per-body velocity pair tracked by the solver: `p` is the post-impulse velocity at the
/// start of the step, `m` the midpoint velocity that moves positions.
#[derive(Clone, Copy, Default)]
struct Vel {
    pv: Vec2,
    pw: f64,
    mv: Vec2,
    mw: f64,
}

#[derive(Clone, Copy)]
struct Contact {
    a: usize,
    b: usize,
    pair: usize,
    ra: Vec2,
    rb: Vec2,
    n: Vec2,
    t: Vec2,
    point: Vec2,
    sep: f64,
    kn: f64,
    kt: f64,
    mu: f64,
    e: f64,
    un0: f64,
    ut0: f64,
    spec_target: f64,
    bounce: bool,
    pn: f64,
    pt: f64,
}

struct Pair {
    a: usize,
    b: usize,
    normal: Vec2,
    mu: f64,
    first: usize,
    count: usize,
}

#[derive(Clone, Copy)]
struct Ground {
    body: usize,
    lim_lin: f64,
    lim_ang: f64,
    p: Vec2,
    pa: f64,
}

struct Ctx<'a> {
    world: &'a World,
    dt: f64,
    im: Vec<f64>,
    ii: Vec<f64>,
    v0: Vec<Vec2>,
    w0: Vec<f64>,
    /// Smooth forces excluding springs and damping.
    force: Vec<Vec2>,
    torque: Vec<f64>,
    contacts: Vec<Contact>,
    pairs: Vec<Pair>,
    ground: Vec<Ground>,
    /// Accumulated start-of-step impulses per body.
    jv: Vec<Vec2>,
    jw: Vec<f64>,
    /// Accumulated damping impulse per spring (a smooth force times dt).
    damp: Vec<Vec2>,
    vel: Vec<Vel>,
}

fn point_vel(v: Vec2, w: f64, r: Vec2) -> Vec2 {
    v + cross_sv(w, r)
}

impl Ctx<'_> {
    fn rel_m(&self, c: &Contact) -> Vec2 {
        let (a, b) = (&self.vel[c.a], &self.vel[c.b]);
        point_vel(b.mv, b.mw, c.rb) - point_vel(a.mv, a.mw, c.ra)
    }

    fn rel_p(&self, c: &Contact) -> Vec2 {
        let (a, b) = (&self.vel[c.a], &self.vel[c.b]);
        point_vel(b.pv, b.pw, c.rb) - point_vel(a.pv, a.pw, c.ra)
    }

    fn rel_0(&self, c: &Contact) -> Vec2 {
        point_vel(self.v0[c.b], self.w0[c.b], c.rb) - point_vel(self.v0[c.a], self.w0[c.a], c.ra)
    }

    /// Applies `imp` to B and `-imp` to A as a start-of-step impulse.
    fn apply_contact(&mut self, a: usize, b: usize, ra: Vec2, rb: Vec2, imp: Vec2) {
        let (ima, iia) = (self.im[a], self.ii[a]);
        let (imb, iib) = (self.im[b], self.ii[b]);
        if ima > 0.0 {
            let dv = imp * ima;
            let dw = ra.cross(imp) * iia;
            let va = &mut self.vel[a];
            va.pv -= dv;
            va.mv -= dv;
            va.pw -= dw;
            va.mw -= dw;
            self.jv[a] -= imp;
            self.jw[a] -= ra.cross(imp);
        }
        if imb > 0.0 {
            let dv = imp * imb;
            let dw = rb.cross(imp) * iib;
            let vb = &mut self.vel[b];
            vb.pv += dv;
            vb.mv += dv;
            vb.pw += dw;
            vb.mw += dw;
            self.jv[b] += imp;
            self.jw[b] += rb.cross(imp);
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn reset(&mut self, spring_force: &[Vec2]) {
        let dt = self.dt;
        for i in 0..self.vel.len() {
            self.jv[i] = Vec2::ZERO;
            self.jw[i] = 0.0;
            let (mut f, tq) = (self.force[i], self.torque[i]);
            if self.im[i] > 0.0 {
                f += spring_force[i];
            }
            self.vel[i] = Vel {
                pv: self.v0[i],
                pw: self.w0[i],
                mv: self.v0[i] + f * (0.5 * dt * self.im[i]),
                mw: self.w0[i] + tq * 0.5 * dt * self.ii[i],
            };
        }
        for d in &mut self.damp {
            *d = Vec2::ZERO;
        }
        for g in &mut self.ground {
            g.p = Vec2::ZERO;
            g.pa = 0.0;
        }
        for k in 0..self.contacts.len() {
            let c = self.contacts[k];
            let un_free = self.rel_m(&c).dot(c.n);
            let th = self.world.params.restitution_threshold;
            let c = &mut self.contacts[k];
            c.pn = 0.0;
            c.pt = 0.0;
            c.bounce = c.e > 0.0 && c.un0 < -th && un_free < c.spec_target;
        }
    }

    fn damping_pass(&mut self, state: &WorldState) {
        let dt = self.dt;
        for (s, sp) in self.world.springs.iter().enumerate() {
            let i = sp.body_index;
            if sp.damping <= 0.0 || self.im[i] <= 0.0 {
                continue;
            }
            let va = state
                .anchor_velocities
                .get(s)
                .copied()
                .unwrap_or(Vec2::ZERO);
            let w = self.vel[i].mv - va;
            let cdt = sp.damping * dt;
            let delta = (w * (-cdt) - self.damp[s]) * (1.0 / (1.0 + 0.5 * cdt * self.im[i]));
            self.damp[s] += delta;
            self.vel[i].mv += delta * (0.5 * self.im[i]);
        }
    }

    fn ground_pass(&mut self) {
        for k in 0..self.ground.len() {
            let g = self.ground[k];
            let i = g.body;
            let vel = self.vel[i];
            // linear: post-impulse speed may not exceed the incoming speed
            let gap = vel.mv - vel.pv;
            let r0 = self.v0[i].norm();
            let gn = gap.norm();
            let vp_target = if gn <= r0 { -gap } else { gap * (-r0 / gn) };
            let vm_target = vp_target + gap;
            let lam = (vm_target - vel.mv) * (1.0 / self.im[i]);
            let mut np = g.p + lam;
            let len = np.norm();
            if len > g.lim_lin {
                np = np * (g.lim_lin / len);
            }
            let dp = np - g.p;
            self.ground[k].p = np;
            let dv = dp * self.im[i];
            self.vel[i].pv += dv;
            self.vel[i].mv += dv;
            self.jv[i] += dp;

            let vel = self.vel[i];
            let gap = vel.mw - vel.pw;
            let r0 = self.w0[i].abs();
            let wm_target = 0.0f64.clamp(-r0 + gap, r0 + gap);
            let lam = (wm_target - vel.mw) / self.ii[i];
            let na = (g.pa + lam).clamp(-g.lim_ang, g.lim_ang);
            let dpa = na - g.pa;
            self.ground[k].pa = na;
            let dw = dpa * self.ii[i];
            self.vel[i].pw += dw;
            self.vel[i].mw += dw;
            self.jw[i] += dpa;
        }
    }

    /// Lower bound on the midpoint normal velocity of contact `k`.
    fn normal_target(&self, c: &Contact) -> f64 {
        let un_m = self.rel_m(c).dot(c.n);
        let un_p = self.rel_p(c).dot(c.n);
        let gap = un_m - un_p;
        let mut target = c.spec_target;
        if c.bounce {
            target = target.max(-c.e * c.un0 + gap);
        }
        // the post-impulse normal speed may not exceed the incoming one
        target.min(-c.un0 + gap)
    }

    fn friction_point(&mut self, k: usize) {
        let c = self.contacts[k];
        let ut_m = self.rel_m(&c).dot(c.t);
        let ut_p = self.rel_p(&c).dot(c.t);
        let gap = ut_m - ut_p;
        let r0 = c.ut0.abs();
        let target = 0.0f64.clamp(-r0 + gap, r0 + gap);
        let lam = c.kt * (target - ut_m);
        let lim = c.mu * c.pn;
        let pt = (c.pt + lam).clamp(-lim, lim);
        let dpt = pt - c.pt;
        self.contacts[k].pt = pt;
        self.apply_contact(c.a, c.b, c.ra, c.rb, c.t * dpt);
    }

    fn normal_point(&mut self, k: usize) {
        let c = self.contacts[k];
        let target = self.normal_target(&c);
        let un_m = self.rel_m(&c).dot(c.n);
        let pn = (c.pn + c.kn * (target - un_m)).max(0.0);
        let dpn = pn - c.pn;
        self.contacts[k].pn = pn;
        self.apply_contact(c.a, c.b, c.ra, c.rb, c.n * dpn);
    }

    /// Solves both normal impulses of a two-point manifold as a 2x2 complementarity
    /// problem; returns false when the system is too ill-conditioned.
    fn normal_block(&mut self, k: usize) -> bool {
        let (c1, c2) = (self.contacts[k], self.contacts[k + 1]);
        let (a, b) = (c1.a, c1.b);
        let n = c1.n;
        let (ra1, rb1, ra2, rb2) = (
            c1.ra.cross(n),
            c1.rb.cross(n),
            c2.ra.cross(n),
            c2.rb.cross(n),
        );
        let base = self.im[a] + self.im[b];
        let k11 = base + self.ii[a] * ra1 * ra1 + self.ii[b] * rb1 * rb1;
        let k22 = base + self.ii[a] * ra2 * ra2 + self.ii[b] * rb2 * rb2;
        let k12 = base + self.ii[a] * ra1 * ra2 + self.ii[b] * rb1 * rb2;
        let det = k11 * k22 - k12 * k12;
        if !(det > 1e-9 * k11 * k22) {
            return false;
        }
        let (p1, p2) = (c1.pn, c2.pn);
        let t1 = self.normal_target(&c1);
        let t2 = self.normal_target(&c2);
        let v1 = self.rel_m(&c1).dot(n);
        let v2 = self.rel_m(&c2).dot(n);
        // residual at zero impulse: velocity minus target with accumulated impulses removed
        let b1 = v1 - k11 * p1 - k12 * p2 - t1;
        let b2 = v2 - k12 * p1 - k22 * p2 - t2;
        let (x1, x2) = 'solve: {
            let x1 = (-k22 * b1 + k12 * b2) / det;
            let x2 = (k12 * b1 - k11 * b2) / det;
            if x1 >= 0.0 && x2 >= 0.0 {
                break 'solve (x1, x2);
            }
            let x1 = -b1 / k11;
            if x1 >= 0.0 && k12 * x1 + b2 >= 0.0 {
                break 'solve (x1, 0.0);
            }
            let x2 = -b2 / k22;
            if x2 >= 0.0 && k12 * x2 + b1 >= 0.0 {
                break 'solve (0.0, x2);
            }
            if b1 >= 0.0 && b2 >= 0.0 {
                break 'solve (0.0, 0.0);
            }
            return false;
        };
        self.contacts[k].pn = x1;
        self.contacts[k + 1].pn = x2;
        self.apply_contact(a, b, c1.ra, c1.rb, n * (x1 - p1));
        self.apply_contact(a, b, c2.ra, c2.rb, n * (x2 - p2));
        true
    }

    fn contact_pass(&mut self) {
        for pi in 0..self.pairs.len() {
            let (first, count) = (self.pairs[pi].first, self.pairs[pi].count);
            for k in first..first + count {
                self.friction_point(k);
            }
            if count == 2 && self.normal_block(first) {
                continue;
            }
            for k in first..first + count {
                self.normal_point(k);
            }
        }
    }

    fn solve(&mut self, state: &WorldState, spring_force: &[Vec2]) {
        self.reset(spring_force);
        for _ in 0..self.world.params.velocity_iterations {
            self.damping_pass(state);
            self.ground_pass();
            self.contact_pass();
        }
        self.enforce_dissipation(spring_force);
        // settle damping exactly on the final impulses
        self.damping_pass(state);
    }

    /// Work of all start-of-step impulses split into (linear, quadratic) parts in a common scale.
    fn impulse_work_terms(&self) -> (f64, f64) {
        let mut lin = 0.0;
        let mut quad = 0.0;
        for c in &self.contacts {
            let p = c.n * c.pn + c.t * c.pt;
            let u0 = self.rel_0(c);
            let up = self.rel_p(c);
            lin += p.dot(u0);
            quad += p.dot(up - u0);
        }
        for g in &self.ground {
            let i = g.body;
            let vel = self.vel[i];
            lin += g.p.dot(self.v0[i]) + g.pa * self.w0[i];
            quad += g.p.dot(vel.pv - self.v0[i]) + g.pa * (vel.pw - self.w0[i]);
        }
        (lin, quad)
    }

    /// Scales back all impulses when unconverged sequential impulses would add energy.
    #[allow(clippy::needless_range_loop)]
    fn enforce_dissipation(&mut self, spring_force: &[Vec2]) {
        let (a, b) = self.impulse_work_terms();
        let w = a + 0.5 * b;
        if w <= 0.0 {
            return;
        }
        let alpha = if a < 0.0 && b > 0.0 {
            (-2.0 * a / b).min(1.0)
        } else {
            0.0
        };
        for c in &mut self.contacts {
            c.pn *= alpha;
            c.pt *= alpha;
        }
        for g in &mut self.ground {
            g.p = g.p * alpha;
            g.pa *= alpha;
        }
        let dt = self.dt;
        for i in 0..self.vel.len() {
            if self.im[i] <= 0.0 {
                continue;
            }
            self.jv[i] = self.jv[i] * alpha;
            self.jw[i] *= alpha;
            let pv = self.v0[i] + self.jv[i] * self.im[i];
            let pw = self.w0[i] + self.jw[i] * self.ii[i];
            let f = self.force[i] + spring_force[i];
            self.vel[i] = Vel {
                pv,
                pw,
                mv: pv + f * (0.5 * dt * self.im[i]),
                mw: pw + self.torque[i] * 0.5 * dt * self.ii[i],
            };
        }
        for (s, sp) in self.world.springs.iter().enumerate() {
            let i = sp.body_index;
            if self.im[i] > 0.0 {
                self.vel[i].mv += self.damp[s] * (0.5 * self.im[i]);
            }
        }
    }
}

/// Discrete gradient of the spring potential between relative positions `q0` and `q1`.
fn spring_gradient(k: f64, rest: f64, q0: Vec2, q1: Vec2) -> Vec2 {
    if k == 0.0 {
        return Vec2::ZERO;
    }
    let (l0, l1) = (q0.norm(), q1.norm());
    let s = l0 + l1;
    if s < 1e-300 {
        return Vec2::ZERO;
    }
    (q0 + q1) * (0.5 * k * (s - 2.0 * rest) / s)
}

pub(super) fn spring_energy(k: f64, rest: f64, q: Vec2) -> f64 {
    let ext = q.norm() - rest;
    0.5 * k * ext * ext
}

/// Advances the world by `dt`.
///
/// `controls` holds one wrench per body (applied to dynamic bodies only) or is empty.
pub fn step(
    world: &World,
    state: &WorldState,
    controls: &[Wrench],
    dt: f64,
) -> Result<(WorldState, StepReport), SimError> {
    let n = world.bodies.len();
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidInput(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if state.poses.len() != n || state.twists.len() != n {
        return Err(SimError::InvalidInput(format!(
            "state has {} poses and {} twists for {n} bodies",
            state.poses.len(),
            state.twists.len()
        )));
    }
    if !controls.is_empty() && controls.len() != n {
        return Err(SimError::InvalidInput(format!(
            "{} controls for {n} bodies",
            controls.len()
        )));
    }
    let ns = world.springs.len();
    if state.anchors.len() != ns || state.anchor_velocities.len() != ns {
        return Err(SimError::InvalidInput(
            "anchor arrays do not match springs".into(),
        ));
    }
    let params = world.params;
    let zero = Wrench::default();

    let mut im = vec![0.0; n];
    let mut ii = vec![0.0; n];
    let mut v0 = vec![Vec2::ZERO; n];
    let mut w0 = vec![0.0; n];
    let mut force = vec![Vec2::ZERO; n];
    let mut torque = vec![0.0; n];
    for (i, b) in world.bodies.iter().enumerate() {
        match b.motion_kind {
            MotionKind::Dynamic => {
                im[i] = 1.0 / b.mass;
                ii[i] = 1.0 / b.inertia;
                v0[i] = state.twists[i].linear();
                w0[i] = state.twists[i].omega;
                let u = controls.get(i).unwrap_or(&zero);
                force[i] = world.gravity * b.mass + u.force();
                torque[i] = u.tau;
            }
            MotionKind::Kinematic => {
                v0[i] = state.twists[i].linear();
                w0[i] = state.twists[i].omega;
            }
            MotionKind::Static => {}
        }
    }

    let anchors1: Vec<Vec2> = state
        .anchors
        .iter()
        .zip(&state.anchor_velocities)
        .map(|(a, v)| *a + *v * dt)
        .collect();
    let has_springs = world
        .springs
        .iter()
        .any(|s| s.stiffness > 0.0 && im[s.body_index] > 0.0);
    let mut grad: Vec<Vec2> = world
        .springs
        .iter()
        .enumerate()
        .map(|(s, sp)| {
            let q0 = state.poses[sp.body_index].position() - state.anchors[s];
            spring_gradient(sp.stiffness, sp.rest_length, q0, q0)
        })
        .collect();
    let spring_force = |grad: &[Vec2]| {
        let mut f = vec![Vec2::ZERO; n];
        for (s, sp) in world.springs.iter().enumerate() {
            f[sp.body_index] -= grad[s];
        }
        f
    };

    // contact generation
    let placed: Vec<Placed> = (0..n)
        .map(|i| world.colliders[i].placed(&state.poses[i]))
        .collect();
    let sf0 = spring_force(&grad);
    let speed_bound: Vec<f64> = (0..n)
        .map(|i| {
            let r = world.colliders[i].bound_radius;
            let acc = (force[i] + sf0[i]).norm() * im[i] + torque[i].abs() * ii[i] * r;
            v0[i].norm() + w0[i].abs() * r + acc * dt
        })
        .collect();
    let mut contacts = Vec::new();
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if im[a] == 0.0 && im[b] == 0.0 {
                continue;
            }
            let pa = state.poses[a].position();
            let pb = state.poses[b].position();
            let margin = params.slop + 2.0 * dt * (speed_bound[a] + speed_bound[b]);
            let reach = world.colliders[a].bound_radius + world.colliders[b].bound_radius + margin;
            if (pb - pa).norm_sq() > reach * reach {
                continue;
            }
            let Some(m) = collide(&placed[a], &placed[b], margin) else {
                continue;
            };
            let limit = params.tunneling_fraction * world.min_extent(a).min(world.min_extent(b));
            let depth = m
                .points
                .iter()
                .map(|p| -p.separation)
                .fold(f64::MIN, f64::max);
            if depth > limit {
                return Err(SimError::Tunneling { a, b, depth });
            }
            let (ba, bb) = (&world.bodies[a], &world.bodies[b]);
            let mu = combined_mu(ba.friction_mu, bb.friction_mu);
            let e = ba.restitution.max(bb.restitution);
            let pair = pairs.len();
            pairs.push(Pair {
                a,
                b,
                normal: m.normal,
                mu,
                first: contacts.len(),
                count: m.points.len(),
            });
            let nrm = m.normal;
            let tan = nrm.perp();
            for p in &m.points {
                let ra = p.point - pa;
                let rb = p.point - pb;
                let eff = |d: Vec2| {
                    let ca = ra.cross(d);
                    let cb = rb.cross(d);
                    let k = im[a] + im[b] + ca * ca * ii[a] + cb * cb * ii[b];
                    if k > 0.0 {
                        1.0 / k
                    } else {
                        0.0
                    }
                };
                let u0 = point_vel(v0[b], w0[b], rb) - point_vel(v0[a], w0[a], ra);
                contacts.push(Contact {
                    a,
                    b,
                    pair,
                    ra,
                    rb,
                    n: nrm,
                    t: tan,
                    point: p.point,
                    sep: p.separation,
                    kn: eff(nrm),
                    kt: eff(tan),
                    mu,
                    e,
                    un0: u0.dot(nrm),
                    ut0: u0.dot(tan),
                    spec_target: if p.separation > 0.0 {
                        -p.separation / dt
                    } else {
                        0.0
                    },
                    bounce: false,
                    pn: 0.0,
                    pt: 0.0,
                });
            }
        }
    }
    let ground: Vec<Ground> = match world.ground {
        Some(g) if g.mu > 0.0 && g.normal_accel > 0.0 => (0..n)
            .filter(|&i| im[i] > 0.0)
            .map(|i| {
                let b = &world.bodies[i];
                let mu = combined_mu(g.mu, b.friction_mu);
                let load = mu * b.mass * g.normal_accel * dt;
                Ground {
                    body: i,
                    lim_lin: load,
                    lim_ang: load * (b.inertia / b.mass).sqrt(),
                    p: Vec2::ZERO,
                    pa: 0.0,
                }
            })
            .collect(),
        _ => Vec::new(),
    };

    let mut ctx = Ctx {
        world,
        dt,
        im,
        ii,
        v0,
        w0,
        force,
        torque,
        contacts,
        pairs,
        ground,
        jv: vec![Vec2::ZERO; n],
        jw: vec![0.0; n],
        damp: vec![Vec2::ZERO; ns],
        vel: vec![Vel::default(); n],
    };

    let advance = |ctx: &Ctx| -> Vec<Vec2> {
        (0..n)
            .map(|i| state.poses[i].position() + ctx.vel[i].mv * dt)
            .collect()
    };
    let mut sf = spring_force(&grad);
    ctx.solve(state, &sf);
    let mut pos1 = advance(&ctx);
    if has_springs {
        for _ in 0..16 {
            for (s, sp) in world.springs.iter().enumerate() {
                let i = sp.body_index;
                let q0 = state.poses[i].position() - state.anchors[s];
                let q1 = pos1[i] - anchors1[s];
                grad[s] = spring_gradient(sp.stiffness, sp.rest_length, q0, q1);
            }
            sf = spring_force(&grad);
            ctx.solve(state, &sf);
            let next = advance(&ctx);
            let change = next
                .iter()
                .zip(&pos1)
                .map(|(a, b)| (*a - *b).norm())
                .fold(0.0, f64::max);
            pos1 = next;
            if change < 1e-15 {
                break;
            }
        }
    }

    // work bookkeeping on the final impulses
    let mut w_noncons = 0.0;
    let mut w_control = 0.0;
    for c in &ctx.contacts {
        let p = c.n * c.pn + c.t * c.pt;
        if p == Vec2::ZERO {
            continue;
        }
        let u0 = ctx.rel_0(c);
        let up = ctx.rel_p(c);
        w_noncons += 0.5 * p.dot(u0 + up);
        let kind = |i: usize| world.bodies[i].motion_kind;
        if kind(c.a) == MotionKind::Kinematic {
            w_control += p.dot(point_vel(ctx.v0[c.a], ctx.w0[c.a], c.ra));
        }
        if kind(c.b) == MotionKind::Kinematic {
            w_control -= p.dot(point_vel(ctx.v0[c.b], ctx.w0[c.b], c.rb));
        }
    }
    for g in &ctx.ground {
        let i = g.body;
        let vel = ctx.vel[i];
        w_noncons += 0.5 * (g.p.dot(ctx.v0[i] + vel.pv) + g.pa * (ctx.w0[i] + vel.pw));
    }
    for (s, sp) in world.springs.iter().enumerate() {
        let i = sp.body_index;
        if ctx.im[i] <= 0.0 {
            continue;
        }
        let va = state.anchor_velocities[s];
        let d = ctx.damp[s];
        w_noncons += d.dot(ctx.vel[i].mv - va);
        w_control += d.dot(va);
        w_control -= grad[s].dot(anchors1[s] - state.anchors[s]);
    }

    let mut poses = state.poses.clone();
    let mut twists = state.twists.clone();
    for (i, b) in world.bodies.iter().enumerate() {
        let p0 = state.poses[i];
        match b.motion_kind {
            MotionKind::Dynamic => {
                let vel = ctx.vel[i];
                let u = controls.get(i).unwrap_or(&zero);
                let dx = vel.mv * dt;
                let dth = vel.mw * dt;
                w_control += u.force().dot(dx) + u.tau * dth;
                let v1 = vel.mv * 2.0 - vel.pv;
                let w1 = 2.0 * vel.mw - vel.pw;
                poses[i] = Pose2::new(p0.x + dx.x, p0.y + dx.y, p0.theta + dth);
                twists[i] = Twist2::new(v1.x, v1.y, w1);
            }
            MotionKind::Kinematic => {
                let t = state.twists[i];
                poses[i] = Pose2::new(p0.x + t.vx * dt, p0.y + t.vy * dt, p0.theta + t.omega * dt);
            }
            MotionKind::Static => {}
        }
    }

    // split-impulse penetration recovery; moves positions without touching velocities
    let mut w_numerical = 0.0;
    let deep: Vec<usize> = (0..ctx.contacts.len())
        .filter(|&k| ctx.contacts[k].sep < -params.slop)
        .collect();
    if !deep.is_empty() && params.baumgarte > 0.0 {
        let mut pv = vec![Vec2::ZERO; n];
        let mut pw = vec![0.0; n];
        let mut acc = vec![0.0; deep.len()];
        for _ in 0..params.velocity_iterations {
            for (slot, &k) in deep.iter().enumerate() {
                let c = &ctx.contacts[k];
                let rel = point_vel(pv[c.b], pw[c.b], c.rb) - point_vel(pv[c.a], pw[c.a], c.ra);
                let target = params.baumgarte * (-c.sep - params.slop) / dt;
                let lam = c.kn * (target - rel.dot(c.n));
                let new = (acc[slot] + lam).max(0.0);
                let d = c.n * (new - acc[slot]);
                acc[slot] = new;
                pv[c.a] -= d * ctx.im[c.a];
                pw[c.a] -= c.ra.cross(d) * ctx.ii[c.a];
                pv[c.b] += d * ctx.im[c.b];
                pw[c.b] += c.rb.cross(d) * ctx.ii[c.b];
            }
        }
        for i in 0..n {
            if ctx.im[i] == 0.0 {
                continue;
            }
            let shift = pv[i] * dt;
            let p = poses[i];
            poses[i] = Pose2::new(p.x + shift.x, p.y + shift.y, p.theta + pw[i] * dt);
            w_numerical -= world.bodies[i].mass * world.gravity.dot(shift);
        }
    }
    for (s, sp) in world.springs.iter().enumerate() {
        let i = sp.body_index;
        if ctx.im[i] <= 0.0 || sp.stiffness == 0.0 {
            continue;
        }
        let q0 = state.poses[i].position() - state.anchors[s];
        let q1_nominal = pos1[i] - anchors1[s];
        let q1 = poses[i].position() - anchors1[s];
        let dv = spring_energy(sp.stiffness, sp.rest_length, q1)
            - spring_energy(sp.stiffness, sp.rest_length, q0);
        w_numerical += dv - grad[s].dot(q1_nominal - q0);
    }

    let mut report_contacts = Vec::new();
    for (pi, pair) in ctx.pairs.iter().enumerate() {
        let mut pn = 0.0;
        let mut pt = 0.0;
        let mut weighted = Vec2::ZERO;
        let mut mean = Vec2::ZERO;
        let mut count = 0usize;
        let mut touching = false;
        let mut slip: f64 = 0.0;
        for c in ctx.contacts.iter().filter(|c| c.pair == pi) {
            pn += c.pn;
            pt += c.pt;
            weighted += c.point * c.pn;
            mean += c.point;
            count += 1;
            touching |= c.sep <= params.slop;
            slip = slip.max(ctx.rel_m(c).dot(c.t).abs());
        }
        if count == 0 || !(touching || pn > 0.0) {
            continue;
        }
        let point = if pn > 0.0 {
            weighted * (1.0 / pn)
        } else {
            mean * (1.0 / count as f64)
        };
        report_contacts.push(ContactPoint {
            point,
            normal: pair.normal,
            normal_force: pn / dt,
            tangent_force: pt / dt,
            slip_speed: slip,
            body_pair: (pair.a, pair.b),
            mu: pair.mu,
        });
    }

    let next = WorldState {
        poses,
        twists,
        time: state.time + dt,
        anchors: anchors1,
        anchor_velocities: state.anchor_velocities.clone(),
    };
    if next.poses.iter().any(|p| !p.is_finite()) || next.twists.iter().any(|t| !t.is_finite()) {
        return Err(SimError::NonFinite);
    }
    Ok((
        next,
        StepReport {
            contacts: report_contacts,
            w_noncons,
            w_control,
            w_numerical,
            dt,
        },
    ))
}
