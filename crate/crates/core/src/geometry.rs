//! Planar vectors, poses, convex polytopes and exact set distances.
//!
//! Polytopes are kept in both representations: the half-space form `G z <= g`
//! (unit-norm rows, counterclockwise edge order) used by zone tests and collision
//! constraints, and the vertex form used by distance queries and rendering.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for membership and degeneracy predicates.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("sets intersect, no separating hyperplane exists")]
    NotSeparable,
}

/// Planar point or direction in meters.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > f64::MIN_POSITIVE && n.is_finite()).then(|| self / n)
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Left-hand perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        self + (other - self) * t
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
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

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Signed shortest angular difference `a - b`, in `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// Planar pose. Serialized as `[x, y, theta]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose {
    pub position: Vec2,
    /// Radians, normalized to `(-pi, pi]`.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    pub fn from_parts(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: normalize_angle(heading),
        }
    }

    /// Maps a body-frame point into the world frame.
    pub fn apply(&self, body_point: Vec2) -> Vec2 {
        body_point.rotated(self.heading) + self.position
    }
}

impl From<[f64; 3]> for Pose {
    fn from(a: [f64; 3]) -> Self {
        Pose::new(a[0], a[1], a[2])
    }
}

impl From<Pose> for [f64; 3] {
    fn from(p: Pose) -> Self {
        [p.position.x, p.position.y, p.heading]
    }
}

/// Closed half-plane `normal . z <= offset` with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec2,
    pub offset: f64,
}

impl Hyperplane {
    pub fn signed_distance(&self, z: Vec2) -> f64 {
        self.normal.dot(z) - self.offset
    }
}

/// Bounded convex polygon `{ z : G z <= g }`.
///
/// Rows of `G` have unit norm and follow the counterclockwise edge order of
/// `vertices`: row `i` is the outward normal of the edge `v[i] -> v[i+1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRepr", into = "PolytopeRepr")]
pub struct ConvexPolytope {
    normals: Vec<Vec2>,
    offsets: Vec<f64>,
    vertices: Vec<Vec2>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeRepr {
    vertices: Vec<Vec2>,
}

impl TryFrom<PolytopeRepr> for ConvexPolytope {
    type Error = GeometryError;
    fn try_from(r: PolytopeRepr) -> Result<Self, Self::Error> {
        ConvexPolytope::from_vertices(&r.vertices)
    }
}

impl From<ConvexPolytope> for PolytopeRepr {
    fn from(p: ConvexPolytope) -> Self {
        PolytopeRepr {
            vertices: p.vertices,
        }
    }
}

/// Convex hull by monotone chain; collinear points dropped. Counterclockwise.
fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() <= EPS);
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts
        .iter()
        .fold(1.0_f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
    let tol = EPS * scale * scale;
    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);

    let mut lower: Vec<Vec2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= tol {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= tol {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
}

impl ConvexPolytope {
    /// Minimal half-space representation of the convex hull of `vertices`.
    pub fn from_vertices(vertices: &[Vec2]) -> Result<Self, GeometryError> {
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::DegenerateInput("non-finite vertex"));
        }
        let hull = convex_hull(vertices);
        if hull.len() < 3 || polygon_area(&hull) <= EPS * EPS {
            return Err(GeometryError::DegenerateInput("convex hull has zero area"));
        }
        Ok(Self::from_ccw_hull(hull))
    }

    fn from_ccw_hull(vertices: Vec<Vec2>) -> Self {
        let n = vertices.len();
        let mut normals = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let edge = b - a;
            let normal = Vec2::new(edge.y, -edge.x) / edge.norm();
            normals.push(normal);
            offsets.push(normal.dot(a));
        }
        Self {
            normals,
            offsets,
            vertices,
        }
    }

    /// Builds a polytope from half-spaces `normal . z <= offset` by vertex enumeration.
    /// Redundant rows are dropped.
    pub fn from_halfspaces(normals: &[Vec2], offsets: &[f64]) -> Result<Self, GeometryError> {
        if normals.len() != offsets.len() || normals.len() < 3 {
            return Err(GeometryError::DegenerateInput(
                "need at least three half-spaces",
            ));
        }
        let mut rows = Vec::with_capacity(normals.len());
        for (&n, &g) in normals.iter().zip(offsets) {
            let len = n.norm();
            if len <= EPS || !g.is_finite() {
                return Err(GeometryError::DegenerateInput("zero normal"));
            }
            rows.push((n / len, g / len));
        }
        let mut candidates = Vec::new();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let (n1, g1) = rows[i];
                let (n2, g2) = rows[j];
                let det = n1.cross(n2);
                if det.abs() <= EPS {
                    continue;
                }
                let p = Vec2::new((g1 * n2.y - g2 * n1.y) / det, (n1.x * g2 - n2.x * g1) / det);
                let scale = 1.0 + p.norm();
                if rows.iter().all(|&(n, g)| n.dot(p) <= g + EPS * scale) {
                    candidates.push(p);
                }
            }
        }
        Self::from_vertices(&candidates)
    }

    /// Axis-aligned rectangle with the given corners.
    pub fn rectangle(min: Vec2, max: Vec2) -> Result<Self, GeometryError> {
        Self::from_vertices(&[min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)])
    }

    /// Rectangle of the given length (along x) and width centered at the origin.
    pub fn centered_box(length: f64, width: f64) -> Result<Self, GeometryError> {
        let h = Vec2::new(0.5 * length, 0.5 * width);
        Self::rectangle(-h, h)
    }

    /// Regular polygon inscribed in a circle.
    pub fn regular(center: Vec2, radius: f64, sides: usize) -> Result<Self, GeometryError> {
        let pts: Vec<Vec2> = (0..sides.max(3))
            .map(|i| {
                let a = 2.0 * PI * i as f64 / sides.max(3) as f64;
                center + Vec2::new(a.cos(), a.sin()) * radius
            })
            .collect();
        Self::from_vertices(&pts)
    }

    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn num_edges(&self) -> usize {
        self.normals.len()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let mut c = Vec2::ZERO;
        let mut a2 = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.cross(q);
            a2 += w;
            c += (p + q) * w;
        }
        c / (3.0 * a2)
    }

    /// Closed-set membership: boundary points count as inside.
    pub fn contains(&self, point: Vec2) -> bool {
        let tol = EPS * (1.0 + point.norm());
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(n, g)| n.dot(point) <= g + tol)
    }

    /// `max_{z in P} dir . z`.
    pub fn support(&self, dir: Vec2) -> f64 {
        self.vertices
            .iter()
            .map(|v| dir.dot(*v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_{z in P} dir . z`.
    pub fn min_support(&self, dir: Vec2) -> f64 {
        self.vertices
            .iter()
            .map(|v| dir.dot(*v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest distance from `point` to a vertex.
    pub fn circumradius_about(&self, point: Vec2) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.distance(point))
            .fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        self.vertices.iter().fold(
            (
                Vec2::new(f64::INFINITY, f64::INFINITY),
                Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            ),
            |(lo, hi), v| {
                (
                    Vec2::new(lo.x.min(v.x), lo.y.min(v.y)),
                    Vec2::new(hi.x.max(v.x), hi.y.max(v.y)),
                )
            },
        )
    }

    /// Rigid motion: rotate the body frame by the heading, then translate.
    pub fn transform(&self, pose: &Pose) -> ConvexPolytope {
        let (s, c) = pose.heading.sin_cos();
        let rot = |v: Vec2| Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y);
        let t = pose.position;
        let normals: Vec<Vec2> = self.normals.iter().map(|&n| rot(n)).collect();
        let offsets = normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, g)| g + n.dot(t))
            .collect();
        let vertices = self.vertices.iter().map(|&v| rot(v) + t).collect();
        ConvexPolytope {
            normals,
            offsets,
            vertices,
        }
    }

    pub fn translate(&self, delta: Vec2) -> ConvexPolytope {
        self.transform(&Pose::from_parts(delta, 0.0))
    }

    /// Closest point of the polytope to `point` and its distance (0 inside).
    pub fn closest_point(&self, point: Vec2) -> (f64, Vec2) {
        if self.contains(point) {
            return (0.0, point);
        }
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let c = closest_on_segment(point, self.vertices[i], self.vertices[(i + 1) % n]);
                (c.distance(point), c)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("polytope has vertices")
    }

    /// Sutherland-Hodgman clip of this polygon against the half-spaces of `other`.
    fn clip_by(&self, other: &ConvexPolytope) -> Vec<Vec2> {
        let mut poly = self.vertices.clone();
        for (&n, &g) in other.normals.iter().zip(&other.offsets) {
            if poly.is_empty() {
                break;
            }
            let mut out = Vec::with_capacity(poly.len() + 1);
            for i in 0..poly.len() {
                let a = poly[i];
                let b = poly[(i + 1) % poly.len()];
                let da = n.dot(a) - g;
                let db = n.dot(b) - g;
                if da <= 0.0 {
                    out.push(a);
                }
                if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                    let t = da / (da - db);
                    out.push(a.lerp(b, t));
                }
            }
            poly = out;
        }
        poly
    }
}

/// Closest point to `p` on the segment `[a, b]`.
pub fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq <= f64::MIN_POSITIVE {
        return a;
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    a + ab * t
}

/// Result of a closest-point query between two sets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proximity {
    /// Euclidean set distance in meters, 0 when the sets intersect.
    pub distance: f64,
    pub p_closest: Vec2,
    pub q_closest: Vec2,
}

fn separated_along_edges(p: &ConvexPolytope, q: &ConvexPolytope) -> bool {
    p.normals
        .iter()
        .zip(&p.offsets)
        .any(|(&n, &g)| q.min_support(n) > g)
}

/// Exact distance between two convex polygons with witness points.
///
/// Disjointness is decided by the separating-axis test over both edge sets; for
/// disjoint sets the minimum is attained at a vertex-edge pair.
pub fn polytope_distance(p: &ConvexPolytope, q: &ConvexPolytope) -> Proximity {
    let disjoint = separated_along_edges(p, q) || separated_along_edges(q, p);
    if !disjoint {
        let clipped = p.clip_by(q);
        let witness = if clipped.is_empty() {
            vertex_edge_minimum(p, q).p_closest
        } else {
            clipped.iter().fold(Vec2::ZERO, |acc, v| acc + *v) / clipped.len() as f64
        };
        return Proximity {
            distance: 0.0,
            p_closest: witness,
            q_closest: witness,
        };
    }
    vertex_edge_minimum(p, q)
}

fn vertex_edge_minimum(p: &ConvexPolytope, q: &ConvexPolytope) -> Proximity {
    let mut best = Proximity {
        distance: f64::INFINITY,
        p_closest: Vec2::ZERO,
        q_closest: Vec2::ZERO,
    };
    let nq = q.vertices.len();
    for &v in &p.vertices {
        for j in 0..nq {
            let c = closest_on_segment(v, q.vertices[j], q.vertices[(j + 1) % nq]);
            let d = v.distance(c);
            if d < best.distance {
                best = Proximity {
                    distance: d,
                    p_closest: v,
                    q_closest: c,
                };
            }
        }
    }
    let np = p.vertices.len();
    for &v in &q.vertices {
        for i in 0..np {
            let c = closest_on_segment(v, p.vertices[i], p.vertices[(i + 1) % np]);
            let d = v.distance(c);
            if d < best.distance {
                best = Proximity {
                    distance: d,
                    p_closest: c,
                    q_closest: v,
                };
            }
        }
    }
    best
}

/// Hyperplane with `P` on its negative side and `Q` at least `distance` beyond it.
///
/// The normal points from `P`'s witness toward `Q`'s witness and the offset is
/// `P`'s support value along it.
pub fn separating_hyperplane(
    p: &ConvexPolytope,
    q: &ConvexPolytope,
) -> Result<Hyperplane, GeometryError> {
    let prox = polytope_distance(p, q);
    if prox.distance <= EPS {
        return Err(GeometryError::NotSeparable);
    }
    let normal = (prox.q_closest - prox.p_closest) / prox.distance;
    Ok(Hyperplane {
        normal,
        offset: p.support(normal),
    })
}

/// Obstacle body in its own frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Polygon(ConvexPolytope),
    Circle { radius: f64 },
}

impl Shape {
    pub fn place(&self, pose: &Pose) -> PlacedShape {
        match self {
            Shape::Polygon(p) => PlacedShape::Polygon {
                polytope: p.transform(pose),
                center: pose.position,
            },
            Shape::Circle { radius } => PlacedShape::Circle {
                center: pose.position,
                radius: *radius,
            },
        }
    }
}

/// Obstacle body placed in the world frame.
#[derive(Clone, Debug, PartialEq)]
pub enum PlacedShape {
    Polygon {
        polytope: ConvexPolytope,
        center: Vec2,
    },
    Circle {
        center: Vec2,
        radius: f64,
    },
}

impl PlacedShape {
    /// Reference point (the obstacle pose position).
    pub fn center(&self) -> Vec2 {
        match self {
            PlacedShape::Polygon { center, .. } | PlacedShape::Circle { center, .. } => *center,
        }
    }

    /// Radius of the smallest ball about `center()` containing the shape.
    pub fn circumradius(&self) -> f64 {
        match self {
            PlacedShape::Polygon { polytope, center } => polytope.circumradius_about(*center),
            PlacedShape::Circle { radius, .. } => *radius,
        }
    }

    /// `min_{z in shape} dir . z` for a unit direction.
    pub fn min_support(&self, dir: Vec2) -> f64 {
        match self {
            PlacedShape::Polygon { polytope, .. } => polytope.min_support(dir),
            PlacedShape::Circle { center, radius } => dir.dot(*center) - radius,
        }
    }

    /// Distance from a polytope `p` to this shape; `p_closest` lies on `p`.
    pub fn distance_from(&self, p: &ConvexPolytope) -> Proximity {
        match self {
            PlacedShape::Polygon { polytope, .. } => polytope_distance(p, polytope),
            PlacedShape::Circle { center, radius } => {
                let (d, on_p) = p.closest_point(*center);
                if d <= *radius {
                    let w = if d > 0.0 { on_p } else { *center };
                    return Proximity {
                        distance: 0.0,
                        p_closest: w,
                        q_closest: w,
                    };
                }
                let dir = (on_p - *center) / d;
                Proximity {
                    distance: d - radius,
                    p_closest: on_p,
                    q_closest: *center + dir * *radius,
                }
            }
        }
    }
}
