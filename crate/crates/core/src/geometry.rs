//! Planar vector math, poses, convex shapes and narrow-phase collision.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 1e-15).then(|| self * (1.0 / n))
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Velocity of a point at offset `r` on a body spinning at `omega`.
pub fn cross_sv(omega: f64, r: Vec2) -> Vec2 {
    Vec2::new(-omega * r.y, omega * r.x)
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Shortest signed arc from `b` to `a`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    /// Kept in (-pi, pi].
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        self.position() + local.rotated(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Twist2 {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist2 {
    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("degenerate shape: {0}")]
    Degenerate(String),
    #[error("polygon is not strictly convex")]
    NonConvex,
    #[error("polygon vertices are not counter-clockwise")]
    Clockwise,
}

/// Collision shape in body-local coordinates; the local origin is the body's center of mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle { radius: f64 },
    Polygon { vertices: Vec<Vec2> },
}

impl Shape {
    pub fn circle(radius: f64) -> Self {
        Shape::Circle { radius }
    }

    /// Axis-aligned box centered on the origin.
    pub fn rect(width: f64, height: f64) -> Self {
        let (hw, hh) = (0.5 * width, 0.5 * height);
        Shape::Polygon {
            vertices: vec![
                Vec2::new(-hw, -hh),
                Vec2::new(hw, -hh),
                Vec2::new(hw, hh),
                Vec2::new(-hw, hh),
            ],
        }
    }

    pub fn polygon(vertices: Vec<Vec2>) -> Self {
        Shape::Polygon { vertices }
    }

    /// Moment of inertia about the local origin for a body of uniform density and the given mass.
    pub fn unit_inertia(&self, mass: f64) -> f64 {
        match self {
            Shape::Circle { radius } => 0.5 * mass * radius * radius,
            Shape::Polygon { vertices } => {
                // second moment of the polygon area about the origin, scaled to the given mass
                let mut area = 0.0;
                let mut second = 0.0;
                for i in 0..vertices.len() {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % vertices.len()];
                    let cr = a.cross(b);
                    area += 0.5 * cr;
                    second += cr * (a.dot(a) + a.dot(b) + b.dot(b)) / 12.0;
                }
                if area.abs() < 1e-300 {
                    0.0
                } else {
                    mass * second / area
                }
            }
        }
    }

    /// Area centroid in local coordinates (origin for circles).
    pub fn centroid(&self) -> Vec2 {
        match self {
            Shape::Circle { .. } => Vec2::ZERO,
            Shape::Polygon { vertices } => {
                let mut area = 0.0;
                let mut c = Vec2::ZERO;
                for i in 0..vertices.len() {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % vertices.len()];
                    let cr = a.cross(b);
                    area += 0.5 * cr;
                    c += (a + b) * (cr / 6.0);
                }
                if area.abs() < 1e-300 {
                    Vec2::ZERO
                } else {
                    c * (1.0 / area)
                }
            }
        }
    }
}

/// Validated shape with cached edge normals and extents.
#[derive(Clone, Debug)]
pub(crate) struct Collider {
    pub kind: ColliderKind,
    /// Radius of the bounding circle around the local origin.
    pub bound_radius: f64,
    /// Smallest width of the shape across any direction.
    pub min_extent: f64,
}

#[derive(Clone, Debug)]
pub(crate) enum ColliderKind {
    Circle(f64),
    Polygon {
        vertices: Vec<Vec2>,
        normals: Vec<Vec2>,
    },
}

impl Collider {
    pub fn new(shape: &Shape) -> Result<Self, ShapeError> {
        match shape {
            Shape::Circle { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(ShapeError::Degenerate(format!("circle radius {radius}")));
                }
                Ok(Self {
                    kind: ColliderKind::Circle(*radius),
                    bound_radius: *radius,
                    min_extent: 2.0 * radius,
                })
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                if n < 3 {
                    return Err(ShapeError::Degenerate(format!("polygon with {n} vertices")));
                }
                if vertices.iter().any(|v| !v.is_finite()) {
                    return Err(ShapeError::Degenerate("non-finite vertex".into()));
                }
                let scale = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
                if scale <= 0.0 {
                    return Err(ShapeError::Degenerate("zero-size polygon".into()));
                }
                let eps = 1e-12 * scale * scale;
                let mut normals = Vec::with_capacity(n);
                let (mut pos, mut neg, mut flat) = (0, 0, 0);
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    let turn = (b - a).cross(c - b);
                    if turn > eps {
                        pos += 1;
                    } else if turn < -eps {
                        neg += 1;
                    } else {
                        flat += 1;
                    }
                    let edge = b - a;
                    let Some(t) = edge.normalized() else {
                        return Err(ShapeError::Degenerate("repeated vertex".into()));
                    };
                    normals.push(Vec2::new(t.y, -t.x));
                }
                if flat > 0 {
                    return Err(ShapeError::Degenerate("collinear vertices".into()));
                }
                if pos > 0 && neg > 0 {
                    return Err(ShapeError::NonConvex);
                }
                if neg == n {
                    return Err(ShapeError::Clockwise);
                }
                // a star polygon can turn left at every vertex and still wind twice
                let winding: f64 = (0..n)
                    .map(|i| {
                        let a = vertices[(i + n - 1) % n];
                        let b = vertices[i];
                        let c = vertices[(i + 1) % n];
                        (b - a).cross(c - b).atan2((b - a).dot(c - b))
                    })
                    .sum();
                if (winding - TAU).abs() > 1e-6 {
                    return Err(ShapeError::NonConvex);
                }
                let min_extent = normals
                    .iter()
                    .map(|nrm| {
                        let (lo, hi) = vertices.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| {
                            let d = nrm.dot(*v);
                            (lo.min(d), hi.max(d))
                        });
                        hi - lo
                    })
                    .fold(f64::MAX, f64::min);
                Ok(Self {
                    kind: ColliderKind::Polygon {
                        vertices: vertices.clone(),
                        normals,
                    },
                    bound_radius: scale,
                    min_extent,
                })
            }
        }
    }

    pub fn placed(&self, pose: &Pose2) -> Placed {
        match &self.kind {
            ColliderKind::Circle(r) => Placed::Circle {
                center: pose.position(),
                radius: *r,
            },
            ColliderKind::Polygon { vertices, normals } => Placed::Polygon {
                vertices: vertices.iter().map(|v| pose.transform_point(*v)).collect(),
                normals: normals.iter().map(|n| n.rotated(pose.theta)).collect(),
            },
        }
    }
}

/// Collider transformed into world coordinates.
#[derive(Clone, Debug)]
pub(crate) enum Placed {
    Circle {
        center: Vec2,
        radius: f64,
    },
    Polygon {
        vertices: Vec<Vec2>,
        normals: Vec<Vec2>,
    },
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ManifoldPoint {
    pub point: Vec2,
    /// Signed gap along the normal; negative when overlapping.
    pub separation: f64,
}

/// Contact manifold between shapes A and B; `normal` points from A into B.
#[derive(Clone, Debug)]
pub(crate) struct Manifold {
    pub normal: Vec2,
    pub points: Vec<ManifoldPoint>,
}

/// Narrow phase: contact points with separation below `margin`.
pub(crate) fn collide(a: &Placed, b: &Placed, margin: f64) -> Option<Manifold> {
    match (a, b) {
        (
            Placed::Circle {
                center: ca,
                radius: ra,
            },
            Placed::Circle {
                center: cb,
                radius: rb,
            },
        ) => circle_circle(*ca, *ra, *cb, *rb, margin),
        (Placed::Polygon { vertices, normals }, Placed::Circle { center, radius }) => {
            polygon_circle(vertices, normals, *center, *radius, margin)
        }
        (Placed::Circle { center, radius }, Placed::Polygon { vertices, normals }) => {
            polygon_circle(vertices, normals, *center, *radius, margin).map(|mut m| {
                m.normal = -m.normal;
                m
            })
        }
        (
            Placed::Polygon {
                vertices: va,
                normals: na,
            },
            Placed::Polygon {
                vertices: vb,
                normals: nb,
            },
        ) => polygon_polygon(va, na, vb, nb, margin),
    }
}

fn circle_circle(ca: Vec2, ra: f64, cb: Vec2, rb: f64, margin: f64) -> Option<Manifold> {
    let d = cb - ca;
    let dist = d.norm();
    let sep = dist - ra - rb;
    if sep > margin {
        return None;
    }
    let normal = d.normalized().unwrap_or(Vec2::new(0.0, 1.0));
    let pa = ca + normal * ra;
    let pb = cb - normal * rb;
    Some(Manifold {
        normal,
        points: vec![ManifoldPoint {
            point: (pa + pb) * 0.5,
            separation: sep,
        }],
    })
}

/// Normal points from the polygon into the circle.
fn polygon_circle(
    verts: &[Vec2],
    normals: &[Vec2],
    center: Vec2,
    radius: f64,
    margin: f64,
) -> Option<Manifold> {
    let n = verts.len();
    let mut best = 0;
    let mut best_sep = f64::MIN;
    for i in 0..n {
        let s = normals[i].dot(center - verts[i]);
        if s > best_sep {
            best_sep = s;
            best = i;
        }
    }
    if best_sep - radius > margin {
        return None;
    }
    let v1 = verts[best];
    let v2 = verts[(best + 1) % n];
    let (normal, dist) = if best_sep <= 0.0 {
        (normals[best], best_sep)
    } else {
        let u1 = (center - v1).dot(v2 - v1);
        let u2 = (center - v2).dot(v1 - v2);
        if u1 <= 0.0 {
            let d = center - v1;
            (d.normalized().unwrap_or(normals[best]), d.norm())
        } else if u2 <= 0.0 {
            let d = center - v2;
            (d.normalized().unwrap_or(normals[best]), d.norm())
        } else {
            (normals[best], best_sep)
        }
    };
    let sep = dist - radius;
    if sep > margin {
        return None;
    }
    let on_circle = center - normal * radius;
    let on_poly = center - normal * dist;
    Some(Manifold {
        normal,
        points: vec![ManifoldPoint {
            point: (on_circle + on_poly) * 0.5,
            separation: sep,
        }],
    })
}

/// Largest separation of `b` from any face of `a`.
fn max_separation(va: &[Vec2], na: &[Vec2], vb: &[Vec2]) -> (usize, f64) {
    let mut best = (0, f64::MIN);
    for (i, (v, n)) in va.iter().zip(na).enumerate() {
        let s = vb.iter().map(|p| n.dot(*p - *v)).fold(f64::MAX, f64::min);
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// Keeps the part of segment `pts` with `normal . p <= offset`.
fn clip_segment(pts: [Vec2; 2], normal: Vec2, offset: f64) -> Option<[Vec2; 2]> {
    let d0 = normal.dot(pts[0]) - offset;
    let d1 = normal.dot(pts[1]) - offset;
    match (d0 <= 0.0, d1 <= 0.0) {
        (true, true) => Some(pts),
        (false, false) => None,
        (in0, _) => {
            let t = d0 / (d0 - d1);
            let cut = pts[0] + (pts[1] - pts[0]) * t;
            Some(if in0 { [pts[0], cut] } else { [cut, pts[1]] })
        }
    }
}

fn polygon_polygon(
    va: &[Vec2],
    na: &[Vec2],
    vb: &[Vec2],
    nb: &[Vec2],
    margin: f64,
) -> Option<Manifold> {
    let (ea, sa) = max_separation(va, na, vb);
    if sa > margin {
        return None;
    }
    let (eb, sb) = max_separation(vb, nb, va);
    if sb > margin {
        return None;
    }
    // prefer A's face unless B's is clearly better; keeps the reference face stable
    let flip = sb > sa + 1e-4;
    let (rv, rn, re, iv, inn) = if flip {
        (vb, nb, eb, va, na)
    } else {
        (va, na, ea, vb, nb)
    };
    let ref_n = rn[re];
    let r1 = rv[re];
    let r2 = rv[(re + 1) % rv.len()];

    let mut inc = 0;
    let mut min_dot = f64::MAX;
    for (i, n) in inn.iter().enumerate() {
        let d = n.dot(ref_n);
        if d < min_dot {
            min_dot = d;
            inc = i;
        }
    }
    let seg = [iv[inc], iv[(inc + 1) % iv.len()]];
    let tangent = (r2 - r1).normalized()?;
    let seg = clip_segment(seg, -tangent, -tangent.dot(r1))?;
    let seg = clip_segment(seg, tangent, tangent.dot(r2))?;

    let mut points = Vec::with_capacity(2);
    for p in seg {
        let sep = ref_n.dot(p - r1);
        if sep <= margin {
            points.push(ManifoldPoint {
                point: p - ref_n * (0.5 * sep),
                separation: sep,
            });
        }
    }
    if points.is_empty() {
        return None;
    }
    Some(Manifold {
        normal: if flip { -ref_n } else { ref_n },
        points,
    })
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    let t = if len_sq > 0.0 {
        ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

fn point_inside(p: Vec2, verts: &[Vec2], normals: &[Vec2]) -> bool {
    verts.iter().zip(normals).all(|(v, n)| n.dot(p - *v) <= 0.0)
}

fn polygon_point_distance(verts: &[Vec2], normals: &[Vec2], p: Vec2) -> f64 {
    if point_inside(p, verts, normals) {
        return 0.0;
    }
    (0..verts.len())
        .map(|i| point_segment_distance(p, verts[i], verts[(i + 1) % verts.len()]))
        .fold(f64::MAX, f64::min)
}

/// Euclidean distance between two placed convex shapes, 0 when touching or overlapping.
pub(crate) fn shape_distance(a: &Placed, b: &Placed) -> f64 {
    match (a, b) {
        (
            Placed::Circle {
                center: ca,
                radius: ra,
            },
            Placed::Circle {
                center: cb,
                radius: rb,
            },
        ) => ((*cb - *ca).norm() - ra - rb).max(0.0),
        (Placed::Polygon { vertices, normals }, Placed::Circle { center, radius })
        | (Placed::Circle { center, radius }, Placed::Polygon { vertices, normals }) => {
            (polygon_point_distance(vertices, normals, *center) - radius).max(0.0)
        }
        (
            Placed::Polygon {
                vertices: va,
                normals: na,
            },
            Placed::Polygon {
                vertices: vb,
                normals: nb,
            },
        ) => {
            let (_, sa) = max_separation(va, na, vb);
            let (_, sb) = max_separation(vb, nb, va);
            if sa <= 0.0 && sb <= 0.0 {
                return 0.0;
            }
            let mut best = f64::MAX;
            for p in vb {
                for i in 0..va.len() {
                    best = best.min(point_segment_distance(*p, va[i], va[(i + 1) % va.len()]));
                }
            }
            for p in va {
                for i in 0..vb.len() {
                    best = best.min(point_segment_distance(*p, vb[i], vb[(i + 1) % vb.len()]));
                }
            }
            best
        }
    }
}

/// Point-in-convex-polygon test for CCW vertex lists (boundary counts as inside).
pub fn point_in_convex_polygon(p: Vec2, verts: &[Vec2]) -> bool {
    let n = verts.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|i| {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        (b - a).cross(p - a) >= -1e-12
    })
}
