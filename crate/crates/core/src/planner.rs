//! Communication-aware receding-horizon planner.
//!
//! Each call linearizes the unicycle around a rollout, finds a feasible
//! trajectory with a distance-seeded tracking QP, and then runs a
//! majorization-minimization loop: the per-slot utility is replaced by its
//! concave surrogate, which is minorized once more by a quadratic so every
//! subproblem is a QP over the `2H` controls.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comm::{comm_utility, CommError, Sensor, SurrogateTerm, DOMAIN_EPS};
use crate::dynamics::{linearize_vector, pose_error_sq, Control, Limits, LinearizedDynamics};
use crate::geometry::{angle_diff, ConvexPolytope, PlacedShape, Pose, Vec2, EPS};
use crate::qp::{QpError, QuadraticProgram};

/// Slack on the true objective before a zone switch is treated as an ascent.
const ASCENT_SLACK: f64 = 1e-9;
/// Absolute slack (bits) on the minorant check.
const MINORANT_SLACK: f64 = 1e-10;
const MAX_ROUNDS: usize = 64;
/// Extra room given to a state that a relaxed half-plane must admit.
const RELAX_MARGIN: f64 = 1e-9;
/// Linearizing at rest drops the heading from the position model, so slow
/// guesses are expanded at this forward speed instead.
const MIN_EXPANSION_SPEED: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommMode {
    Multizone,
    Distance,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionMode {
    Polytope,
    PointMass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Mpcom,
    Rda,
    Pcamp,
    Sdcamp,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [Self::Mpcom, Self::Rda, Self::Pcamp, Self::Sdcamp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mpcom => "mpcom",
            Self::Rda => "rda",
            Self::Pcamp => "pcamp",
            Self::Sdcamp => "sdcamp",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method '{s}' (expected mpcom, rda, pcamp or sdcamp)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub horizon: usize,
    /// Slot length, seconds.
    pub tau: f64,
    pub rho: f64,
    pub eta: f64,
    pub d_safe: f64,
    pub limits: Limits,
    pub mm_max_iters: usize,
    pub mm_tol: f64,
    pub comm_mode: CommMode,
    pub collision_mode: CollisionMode,
    pub trust_radius: f64,
    pub qp_tol: f64,
    /// Reference speed along the path (m/s); waypoint spacing is `ref_speed * tau`.
    pub ref_speed: f64,
    /// Bits that count as one unit of utility inside the optimizer.
    pub utility_unit: f64,
    /// Linearize-and-solve passes of the initialization on a cold start.
    pub init_passes: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            tau: 0.1,
            rho: 0.5,
            eta: 0.1,
            d_safe: 0.1,
            limits: Limits::default(),
            mm_max_iters: 15,
            mm_tol: 1e-4,
            comm_mode: CommMode::Multizone,
            collision_mode: CollisionMode::Polytope,
            trust_radius: 0.5,
            qp_tol: 1e-6,
            ref_speed: 0.8,
            utility_unit: 1e4,
            init_passes: 2,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::InvalidConfig(m.to_string()));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if self.horizon < 1 {
            return bad("horizon must be at least 1");
        }
        if !pos(self.tau) {
            return bad("tau must be positive");
        }
        if !nonneg(self.rho) || !nonneg(self.eta) || !nonneg(self.d_safe) {
            return bad("rho, eta and d_safe must be non-negative");
        }
        if self.mm_max_iters < 1 || self.init_passes < 1 {
            return bad("mm_max_iters and init_passes must be at least 1");
        }
        if !pos(self.mm_tol) || !pos(self.trust_radius) || !pos(self.qp_tol) {
            return bad("mm_tol, trust_radius and qp_tol must be positive");
        }
        if !pos(self.ref_speed) || !pos(self.utility_unit) {
            return bad("ref_speed and utility_unit must be positive");
        }
        self.limits.validate().map_err(PlannerError::InvalidConfig)
    }

    /// Waypoint spacing of the local reference.
    pub fn lookahead(&self) -> f64 {
        self.ref_speed * self.tau
    }

    /// Weight on utility (bits) inside the optimizer; zero disables communication.
    pub fn comm_weight(&self) -> f64 {
        if self.comm_mode == CommMode::None {
            0.0
        } else {
            self.rho / self.utility_unit
        }
    }

    /// The initialization pull toward sensors only applies when communication is on.
    pub fn effective_eta(&self) -> f64 {
        if self.comm_weight() > 0.0 {
            self.eta
        } else {
            0.0
        }
    }
}

pub fn make_baseline(kind: BaselineKind, base: &PlannerConfig) -> PlannerConfig {
    let rho = if base.rho > 0.0 {
        base.rho
    } else {
        PlannerConfig::default().rho
    };
    let (rho, comm_mode, collision_mode) = match kind {
        BaselineKind::Rda => (0.0, CommMode::None, CollisionMode::Polytope),
        BaselineKind::Pcamp => (rho, CommMode::Distance, CollisionMode::PointMass),
        BaselineKind::Sdcamp => (rho, CommMode::Distance, CollisionMode::Polytope),
        BaselineKind::Mpcom => (rho, CommMode::Multizone, CollisionMode::Polytope),
    };
    PlannerConfig {
        rho,
        comm_mode,
        collision_mode,
        ..base.clone()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("path needs at least two waypoints")]
    EmptyPath,
    #[error("expected {expected} states, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("planning problem is infeasible: {0}")]
    Infeasible(String),
    #[error("QP solver failed: {0}")]
    QpNumericalFailure(String),
    #[error("reference pose at step {step} overlaps obstacle {obstacle}")]
    ReferenceInCollision { obstacle: usize, step: usize },
}

impl From<QpError> for PlannerError {
    fn from(e: QpError) -> Self {
        match e {
            QpError::Infeasible => PlannerError::Infeasible("empty constraint set".into()),
            other => PlannerError::QpNumericalFailure(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceWindow {
    pub states: Vec<Pose>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Converged,
    MaxIters,
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub tracking: f64,
    /// Regularizer in optimizer units (non-positive).
    pub communication: f64,
}

/// Minorant, surrogate and frozen-zone utility (bits) at an accepted state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinorantCertificate {
    pub step: usize,
    pub sensor: usize,
    pub minorant: f64,
    pub surrogate: f64,
    pub utility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub states: Vec<Pose>,
    pub controls: Vec<Control>,
    pub objective_trace: Vec<f64>,
    pub cost_breakdown: CostBreakdown,
    pub mm_iterations: usize,
    pub status: PlanStatus,
    #[serde(skip)]
    pub certificates: Vec<MinorantCertificate>,
}

/// Half-plane `normal . p_step <= offset` on the robot center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionConstraint {
    pub step: usize,
    pub normal: Vec2,
    pub offset: f64,
}

impl PositionConstraint {
    pub fn slack(&self, p: Vec2) -> f64 {
        self.offset - self.normal.dot(p)
    }
}

/// Everything a single solve needs.
#[derive(Clone, Copy, Debug)]
pub struct PlanProblem<'a> {
    pub current: Pose,
    /// Control applied in the previous slot; bounds the first rate step.
    pub previous_control: Control,
    pub reference: &'a ReferenceWindow,
    pub sensors: &'a [Sensor],
    /// For each obstacle, its predicted placement at steps `0..=H`.
    pub obstacles: &'a [Vec<PlacedShape>],
    pub robot_body: &'a ConvexPolytope,
}

// ---------------------------------------------------------------------------
// Reference extraction

/// A polyline of poses parameterized by arc length.
#[derive(Clone, Debug)]
pub struct ArcPath {
    poses: Vec<Pose>,
    arcs: Vec<f64>,
}

impl ArcPath {
    pub fn new(path: &[Pose]) -> Result<Self, PlannerError> {
        if path.len() < 2 {
            return Err(PlannerError::EmptyPath);
        }
        let mut arcs = Vec::with_capacity(path.len());
        let mut s = 0.0;
        arcs.push(0.0);
        for w in path.windows(2) {
            s += w[0].position.distance(w[1].position);
            arcs.push(s);
        }
        Ok(Self {
            poses: path.to_vec(),
            arcs,
        })
    }

    pub fn length(&self) -> f64 {
        *self.arcs.last().unwrap()
    }

    pub fn end(&self) -> Pose {
        *self.poses.last().unwrap()
    }

    /// Arc length of the point nearest to `p` among points with arc in `[lo, hi]`.
    pub fn nearest(&self, p: Vec2, lo: f64, hi: f64) -> f64 {
        let lo = lo.clamp(0.0, self.length());
        let hi = hi.clamp(lo, self.length());
        let mut best = (self.pose_at(lo).position.distance(p), lo);
        for i in 0..self.poses.len() - 1 {
            let (s0, s1) = (self.arcs[i], self.arcs[i + 1]);
            let len = s1 - s0;
            if len <= EPS || s1 < lo || s0 > hi {
                continue;
            }
            let a = self.poses[i].position;
            let dir = (self.poses[i + 1].position - a) / len;
            let t = (p - a).dot(dir).clamp(lo.max(s0) - s0, hi.min(s1) - s0);
            let d = (a + dir * t).distance(p);
            if d < best.0 {
                best = (d, s0 + t);
            }
        }
        best.1
    }

    /// Pose at arc length `s`, clamped to the path; headings are interpolated.
    pub fn pose_at(&self, s: f64) -> Pose {
        if s <= 0.0 {
            return self.poses[0];
        }
        if s >= self.length() {
            return self.end();
        }
        let i = self.arcs.partition_point(|&a| a <= s).saturating_sub(1);
        let i = i.min(self.poses.len() - 2);
        let len = self.arcs[i + 1] - self.arcs[i];
        let t = if len > 0.0 {
            (s - self.arcs[i]) / len
        } else {
            0.0
        };
        let (a, b) = (self.poses[i], self.poses[i + 1]);
        Pose::from_parts(
            a.position.lerp(b.position, t),
            a.heading + angle_diff(b.heading, a.heading) * t,
        )
    }

    /// `horizon + 1` poses starting at arc `s0`, spaced by `lookahead`.
    pub fn window(&self, s0: f64, horizon: usize, lookahead: f64) -> ReferenceWindow {
        ReferenceWindow {
            states: (0..=horizon)
                .map(|h| self.pose_at(s0 + h as f64 * lookahead))
                .collect(),
        }
    }
}

pub fn extract_local_reference(
    path: &[Pose],
    current: &Pose,
    horizon: usize,
    lookahead: f64,
) -> Result<ReferenceWindow, PlannerError> {
    let arc = ArcPath::new(path)?;
    let s0 = arc.nearest(current.position, 0.0, f64::INFINITY);
    Ok(arc.window(s0, horizon, lookahead))
}

// ---------------------------------------------------------------------------
// Objective pieces

pub fn tracking_cost(states: &[Pose], reference: &ReferenceWindow) -> Result<f64, PlannerError> {
    if states.len() != reference.states.len() {
        return Err(PlannerError::LengthMismatch {
            expected: reference.states.len(),
            found: states.len(),
        });
    }
    Ok(states
        .iter()
        .zip(&reference.states)
        .map(|(s, r)| pose_error_sq(s, r))
        .sum())
}

/// Utility in bits, or 0 when the model has no zone at the state.
fn utility_or_zero(state: &Pose, sensor: &Sensor, warn: bool) -> f64 {
    match comm_utility(state, sensor) {
        Ok(v) => v,
        Err(e) => {
            if warn {
                log::warn!("state outside the channel model ({e}); utility taken as 0");
            } else {
                log::debug!("state outside the channel model ({e}); utility taken as 0");
            }
            0.0
        }
    }
}

/// `-rho * sum_h sum_k utility` with utility in bits.
pub fn comm_regularizer(states: &[Pose], sensors: &[Sensor], rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let total: f64 = states
        .iter()
        .flat_map(|s| sensors.iter().map(move |k| utility_or_zero(s, k, true)))
        .sum();
    -rho * total
}

fn weighted_utility(states: &[Pose], sensors: &[Sensor], weight: f64) -> f64 {
    if weight == 0.0 {
        return 0.0;
    }
    let total: f64 = states
        .iter()
        .flat_map(|s| sensors.iter().map(move |k| utility_or_zero(s, k, false)))
        .sum();
    -weight * total
}

fn breakdown(
    states: &[Pose],
    reference: &ReferenceWindow,
    sensors: &[Sensor],
    config: &PlannerConfig,
) -> CostBreakdown {
    CostBreakdown {
        tracking: tracking_cost(states, reference).unwrap_or(f64::INFINITY),
        communication: weighted_utility(states, sensors, config.comm_weight()),
    }
}

fn objective(b: &CostBreakdown) -> f64 {
    b.tracking + b.communication
}

// ---------------------------------------------------------------------------
// Collision convexification

fn halfplane(
    step: usize,
    pose: &Pose,
    body: &ConvexPolytope,
    shape: &PlacedShape,
    d_safe: f64,
    mode: CollisionMode,
    fallback: bool,
    obstacle: usize,
) -> Result<PositionConstraint, PlannerError> {
    let c = pose.position;
    let center_dir = || (shape.center() - c).normalized();
    let in_collision = || PlannerError::ReferenceInCollision { obstacle, step };
    match mode {
        CollisionMode::Polytope => {
            let footprint = body.transform(pose);
            let prox = shape.distance_from(&footprint);
            let normal = if prox.distance > EPS {
                (prox.q_closest - prox.p_closest) / prox.distance
            } else if fallback {
                center_dir().unwrap_or(Vec2::new(1.0, 0.0))
            } else {
                return Err(in_collision());
            };
            let reach = footprint.support(normal) - normal.dot(c);
            Ok(PositionConstraint {
                step,
                normal,
                offset: shape.min_support(normal) - d_safe - reach,
            })
        }
        CollisionMode::PointMass => {
            let normal = match center_dir() {
                Some(n) => n,
                None if fallback => Vec2::new(1.0, 0.0),
                None => return Err(in_collision()),
            };
            let radius = shape.circumradius() + body.circumradius_about(Vec2::ZERO) + d_safe;
            Ok(PositionConstraint {
                step,
                normal,
                offset: normal.dot(shape.center()) - radius,
            })
        }
    }
}

/// One half-plane per obstacle and step, separating the footprint at each
/// reference pose from the obstacle's predicted placement.
pub fn convexify_collision(
    ref_states: &[Pose],
    robot_body: &ConvexPolytope,
    obstacles: &[Vec<PlacedShape>],
    d_safe: f64,
    mode: CollisionMode,
) -> Result<Vec<PositionConstraint>, PlannerError> {
    let mut out = Vec::with_capacity(ref_states.len() * obstacles.len());
    for (m, track) in obstacles.iter().enumerate() {
        for (h, pose) in ref_states.iter().enumerate() {
            let Some(shape) = track.get(h).or(track.last()) else {
                continue;
            };
            out.push(halfplane(
                h, pose, robot_body, shape, d_safe, mode, false, m,
            )?);
        }
    }
    Ok(out)
}

/// How far planner-side half-planes may be shifted to admit the linearization states.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Relax {
    /// Only into the safety margin: a state closer than `d_safe` stays admissible.
    Margin,
    /// Fully: every given state is admissible.
    Full,
}

/// Planner-side convexification: overlapping references fall back to the
/// center-to-center direction and half-planes are shifted toward the given
/// states according to `relax`.
fn collision_rows(
    poses: &[Pose],
    problem: &PlanProblem,
    config: &PlannerConfig,
    relax: Relax,
) -> Vec<PositionConstraint> {
    let mut out = Vec::new();
    for (m, track) in problem.obstacles.iter().enumerate() {
        for (h, pose) in poses.iter().enumerate().skip(1) {
            let Some(shape) = track.get(h).or(track.last()) else {
                continue;
            };
            let mut row = halfplane(
                h,
                pose,
                problem.robot_body,
                shape,
                config.d_safe,
                config.collision_mode,
                true,
                m,
            )
            .expect("fallback convexification cannot fail");
            let at_state = row.normal.dot(pose.position) + RELAX_MARGIN;
            row.offset = match relax {
                Relax::Margin => row.offset.max(at_state.min(row.offset + config.d_safe)),
                Relax::Full => row.offset.max(at_state),
            };
            out.push(row);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Condensed QP over controls

/// States as affine functions of the stacked controls: `s_h = M_h u + e_h`.
#[derive(Clone, Debug)]
struct Condensed {
    m: Vec<DMatrix<f64>>,
    e: Vec<Vector3<f64>>,
}

impl Condensed {
    fn new(s0: Vector3<f64>, lin: &[LinearizedDynamics]) -> Self {
        let n = 2 * lin.len();
        let mut m = vec![DMatrix::zeros(3, n)];
        let mut e = vec![s0];
        for (h, l) in lin.iter().enumerate() {
            let mut next: DMatrix<f64> =
                DMatrix::from_iterator(3, n, (l.a * &m[h]).iter().copied());
            for r in 0..3 {
                next[(r, 2 * h)] += l.b[(r, 0)];
                next[(r, 2 * h + 1)] += l.b[(r, 1)];
            }
            m.push(next);
            e.push(l.a * e[h] + l.c);
        }
        Self { m, e }
    }

    fn dim(&self) -> usize {
        self.m[0].ncols()
    }

    fn states(&self, u: &[f64]) -> Vec<Vector3<f64>> {
        let u = DVector::from_column_slice(u);
        self.m
            .iter()
            .zip(&self.e)
            .map(|(m, e)| {
                let s = m * &u;
                Vector3::new(s[0] + e[0], s[1] + e[1], s[2] + e[2])
            })
            .collect()
    }

    /// Adds `sum_i w_i (s_h[i] - target[i])^2` to `1/2 u'Qu + c'u`.
    fn add_quadratic(
        &self,
        q: &mut DMatrix<f64>,
        c: &mut DVector<f64>,
        h: usize,
        w: [f64; 3],
        target: Vector3<f64>,
    ) {
        let m = &self.m[h];
        for i in 0..3 {
            if w[i] == 0.0 {
                continue;
            }
            let row = m.row(i);
            *q += (row.transpose() * row) * (2.0 * w[i]);
            *c += row.transpose() * (2.0 * w[i] * (self.e[h][i] - target[i]));
        }
    }

    /// Adds `g . p_h` to the linear term.
    fn add_linear(&self, c: &mut DVector<f64>, h: usize, g: Vec2) {
        let m = &self.m[h];
        *c += m.row(0).transpose() * g.x + m.row(1).transpose() * g.y;
    }

    /// `normal . p_h <= offset` as a row over the controls.
    fn position_row(&self, h: usize, normal: Vec2, offset: f64) -> (Vec<f64>, f64) {
        let m = &self.m[h];
        let row = (0..self.dim())
            .map(|j| normal.x * m[(0, j)] + normal.y * m[(1, j)])
            .collect();
        let rhs = offset - normal.x * self.e[h][0] - normal.y * self.e[h][1];
        (row, rhs)
    }
}

#[derive(Clone, Debug)]
struct Iterate {
    u: Vec<f64>,
    states: Vec<Vector3<f64>>,
}

impl Iterate {
    fn poses(&self) -> Vec<Pose> {
        self.states
            .iter()
            .map(|s| Pose::new(s[0], s[1], s[2]))
            .collect()
    }

    fn position(&self, h: usize) -> Vec2 {
        Vec2::new(self.states[h][0], self.states[h][1])
    }

    fn controls(&self) -> Vec<Control> {
        self.u
            .chunks_exact(2)
            .map(|c| Control::new(c[0], c[1]))
            .collect()
    }
}

fn state_vec(p: &Pose) -> Vector3<f64> {
    Vector3::new(p.position.x, p.position.y, p.heading)
}

/// Nonlinear rollout with an unwrapped heading.
fn rollout(current: &Pose, controls: &[Control], tau: f64) -> Vec<Vector3<f64>> {
    let mut s = state_vec(current);
    let mut out = vec![s];
    for u in controls {
        let (sin, cos) = s[2].sin_cos();
        s = Vector3::new(
            s[0] + tau * u.v * cos,
            s[1] + tau * u.v * sin,
            s[2] + tau * u.w,
        );
        out.push(s);
    }
    out
}

/// Reference headings unwrapped to lie within pi of the matching state.
fn unwrap_reference(reference: &ReferenceWindow, states: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    reference
        .states
        .iter()
        .zip(states)
        .map(|(r, s)| {
            Vector3::new(
                r.position.x,
                r.position.y,
                s[2] + angle_diff(r.heading, s[2]),
            )
        })
        .collect()
}

/// Tracking part of the QP (steps `1..=H`; step 0 is fixed).
fn tracking_qp(cond: &Condensed, ref_vec: &[Vector3<f64>]) -> (DMatrix<f64>, DVector<f64>) {
    let n = cond.dim();
    let mut q = DMatrix::zeros(n, n);
    let mut c = DVector::zeros(n);
    for h in 1..ref_vec.len() {
        cond.add_quadratic(&mut q, &mut c, h, [1.0; 3], ref_vec[h]);
    }
    (q, c)
}

fn to_program(q: &DMatrix<f64>, c: &DVector<f64>) -> QuadraticProgram {
    let n = c.len();
    let mut qp = QuadraticProgram::new(n);
    let hess = qp.hessian_mut();
    for i in 0..n {
        for j in 0..n {
            // symmetrize against round-off
            hess[i * n + j] = 0.5 * (q[(i, j)] + q[(j, i)]);
        }
    }
    qp.linear_mut().copy_from_slice(c.as_slice());
    qp
}

fn add_control_constraints(qp: &mut QuadraticProgram, previous: Control, limits: &Limits) {
    let n = qp.dim();
    for h in 0..n / 2 {
        qp.add_bounds(2 * h, limits.u_min.v, limits.u_max.v);
        qp.add_bounds(2 * h + 1, limits.u_min.w, limits.u_max.w);
        for (k, lo, hi, prev) in [
            (0, limits.a_min.v, limits.a_max.v, previous.v),
            (1, limits.a_min.w, limits.a_max.w, previous.w),
        ] {
            let mut row = vec![0.0; n];
            row[2 * h + k] = 1.0;
            if h == 0 {
                qp.add_constraint(&row, hi + prev);
                row[k] = -1.0;
                qp.add_constraint(&row, -(lo + prev));
            } else {
                row[2 * (h - 1) + k] = -1.0;
                qp.add_constraint(&row, hi);
                row.iter_mut().for_each(|v| *v = -*v);
                qp.add_constraint(&row, -lo);
            }
        }
    }
}

fn add_position_constraints(
    qp: &mut QuadraticProgram,
    cond: &Condensed,
    rows: &[PositionConstraint],
) {
    for r in rows {
        let (row, rhs) = cond.position_row(r.step, r.normal, r.offset);
        qp.add_constraint(&row, rhs);
    }
}

/// The frozen linearization shared by all MM subproblems of one solve.
#[derive(Clone, Debug)]
struct Frozen {
    cond: Condensed,
}

impl Frozen {
    fn at(current: &Pose, controls: &[Control], tau: f64) -> Self {
        let traj = rollout(current, controls, tau);
        let lin: Vec<_> = controls
            .iter()
            .enumerate()
            .map(|(h, u)| linearize_vector(&traj[h], u, tau))
            .collect();
        Self {
            cond: Condensed::new(traj[0], &lin),
        }
    }

    fn iterate(&self, u: Vec<f64>) -> Iterate {
        let states = self.cond.states(&u);
        Iterate { u, states }
    }
}

fn validate_problem(problem: &PlanProblem, config: &PlannerConfig) -> Result<(), PlannerError> {
    config.validate()?;
    if problem.reference.states.len() != config.horizon + 1 {
        return Err(PlannerError::LengthMismatch {
            expected: config.horizon + 1,
            found: problem.reference.states.len(),
        });
    }
    Ok(())
}

fn expansion_controls(guess: &[Control]) -> Vec<Control> {
    guess
        .iter()
        .map(|u| {
            if u.v.abs() < MIN_EXPANSION_SPEED {
                Control::new(MIN_EXPANSION_SPEED, u.w)
            } else {
                *u
            }
        })
        .collect()
}

fn initial_guess(problem: &PlanProblem, config: &PlannerConfig) -> Vec<Control> {
    let l = &config.limits;
    let u = Control::new(
        problem.previous_control.v.clamp(l.u_min.v, l.u_max.v),
        problem.previous_control.w.clamp(l.u_min.w, l.u_max.w),
    );
    vec![u; config.horizon]
}

/// Distance-seeded initialization; returns the frozen model and its solution.
fn initialize_inner(
    problem: &PlanProblem,
    config: &PlannerConfig,
    warm: Option<&[Control]>,
) -> Result<(Frozen, Iterate), PlannerError> {
    let (mut guess, passes) = match warm {
        Some(w) if w.len() == config.horizon => (w.to_vec(), 1),
        _ => (initial_guess(problem, config), config.init_passes),
    };
    let eta = config.effective_eta();
    let mut last = None;
    for _ in 0..passes {
        // Positions are linear in v along a fixed heading sequence, so the
        // lifted expansion still reproduces the guess exactly.
        let frozen = Frozen::at(&problem.current, &expansion_controls(&guess), config.tau);
        let traj = rollout(&problem.current, &guess, config.tau);
        let poses: Vec<Pose> = traj.iter().map(|s| Pose::new(s[0], s[1], s[2])).collect();
        let ref_vec = unwrap_reference(problem.reference, &traj);
        let (mut q, mut c) = tracking_qp(&frozen.cond, &ref_vec);
        if eta > 0.0 {
            for h in 1..=config.horizon {
                for k in problem.sensors {
                    let z = Vector3::new(k.position.x, k.position.y, 0.0);
                    frozen
                        .cond
                        .add_quadratic(&mut q, &mut c, h, [eta, eta, 0.0], z);
                }
            }
        }
        let mut qp = to_program(&q, &c);
        add_control_constraints(&mut qp, problem.previous_control, &config.limits);
        let rows = collision_rows(&poses, problem, config, Relax::Margin);
        add_position_constraints(&mut qp, &frozen.cond, &rows);
        let sol = qp.solve(config.qp_tol)?;
        let it = frozen.iterate(sol.x);
        guess = it.controls();
        last = Some((frozen, it));
    }
    Ok(last.expect("at least one pass"))
}

fn to_result(
    it: &Iterate,
    problem: &PlanProblem,
    config: &PlannerConfig,
    trace: Vec<f64>,
    status: PlanStatus,
    certificates: Vec<MinorantCertificate>,
) -> PlanResult {
    let states = it.poses();
    let cost_breakdown = breakdown(&states, problem.reference, problem.sensors, config);
    PlanResult {
        mm_iterations: trace.len().saturating_sub(1),
        controls: it.controls(),
        states,
        objective_trace: trace,
        cost_breakdown,
        status,
        certificates,
    }
}

fn true_objective(it: &Iterate, problem: &PlanProblem, config: &PlannerConfig) -> f64 {
    objective(&breakdown(
        &it.poses(),
        problem.reference,
        problem.sensors,
        config,
    ))
}

/// Solves the distance-seeded initialization problem.
pub fn initialize(
    problem: &PlanProblem,
    config: &PlannerConfig,
) -> Result<PlanResult, PlannerError> {
    validate_problem(problem, config)?;
    let (_, it) = initialize_inner(problem, config, None)?;
    let p0 = true_objective(&it, problem, config);
    Ok(to_result(
        &it,
        problem,
        config,
        vec![p0],
        PlanStatus::Converged,
        Vec::new(),
    ))
}

// ---------------------------------------------------------------------------
// MM subproblem

struct Term {
    step: usize,
    sensor: usize,
    surrogate: SurrogateTerm,
    /// Surrogate gradient at the anchor (bits/m).
    grad: Vec2,
    /// Curvature of the quadratic minorant (bits/m^2).
    mu: f64,
}

impl Term {
    fn minorant_increment(&self, p: Vec2) -> f64 {
        let d = p - self.surrogate.anchor;
        self.grad.dot(d) - 0.5 * self.mu * d.norm_sq()
    }
}

fn min_eigenvalue(h: [[f64; 2]; 2]) -> f64 {
    let (a, b, d) = (h[0][0], h[0][1], h[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d).powi(2) + b * b).sqrt();
    mean - rad
}

struct SubOutcome {
    iterate: Iterate,
    objective: f64,
    certificates: Vec<MinorantCertificate>,
}

fn solve_subproblem_inner(
    frozen: &Frozen,
    problem: &PlanProblem,
    config: &PlannerConfig,
    anchor: &Iterate,
    anchor_objective: f64,
) -> Result<SubOutcome, PlannerError> {
    let cond = &frozen.cond;
    let weight = config.comm_weight();
    let anchor_poses = anchor.poses();
    let ref_vec = unwrap_reference(problem.reference, &anchor.states);
    let (q_track, c_track) = tracking_qp(cond, &ref_vec);
    let collisions = collision_rows(&anchor_poses, problem, config, Relax::Full);

    let mut terms = Vec::new();
    if weight > 0.0 {
        for h in 1..=config.horizon {
            for (k, sensor) in problem.sensors.iter().enumerate() {
                let p = anchor.position(h);
                let Ok(surrogate) = SurrogateTerm::at_anchor(p, sensor) else {
                    continue;
                };
                let grad = surrogate.gradient(p).map_err(comm_failure)?;
                let hess = surrogate.hessian(p).map_err(comm_failure)?;
                let floor = (1e-3 * grad.norm() / config.trust_radius).max(1e-9);
                let mu = 1.5 * (-min_eigenvalue(hess)).max(0.0) + floor;
                terms.push(Term {
                    step: h,
                    sensor: k,
                    surrogate,
                    grad,
                    mu,
                });
            }
        }
    }

    let mut cuts: Vec<PositionConstraint> = Vec::new();
    let mut confined: BTreeSet<(usize, usize)> = BTreeSet::new();
    for _ in 0..MAX_ROUNDS {
        let mut q = q_track.clone();
        let mut c = c_track.clone();
        for t in &terms {
            let a = t.surrogate.anchor;
            let w = 0.5 * weight * t.mu;
            cond.add_quadratic(
                &mut q,
                &mut c,
                t.step,
                [w, w, 0.0],
                Vector3::new(a.x, a.y, 0.0),
            );
            cond.add_linear(&mut c, t.step, t.grad * -weight);
        }
        let mut qp = to_program(&q, &c);
        add_control_constraints(&mut qp, problem.previous_control, &config.limits);
        add_position_constraints(&mut qp, cond, &collisions);
        for h in 1..=config.horizon {
            let a = anchor.position(h);
            for (n, v) in [(Vec2::new(1.0, 0.0), a.x), (Vec2::new(0.0, 1.0), a.y)] {
                for s in [1.0, -1.0] {
                    let (row, rhs) = cond.position_row(h, n * s, s * v + config.trust_radius);
                    qp.add_constraint(&row, rhs);
                }
            }
        }
        add_position_constraints(&mut qp, cond, &cuts);
        for &(h, k) in &confined {
            let t = terms.iter().find(|t| t.step == h && t.sensor == k).unwrap();
            let zone = problem.sensors[k]
                .model
                .zone(t.surrogate.zone.zone)
                .expect("confinement only applies to zoned models");
            for (n, o) in zone.normals().iter().zip(zone.offsets()) {
                let (row, rhs) = cond.position_row(h, *n, *o);
                qp.add_constraint(&row, rhs);
            }
        }
        let sol = qp.solve(config.qp_tol)?;
        let it = frozen.iterate(sol.x);

        let mut changed = false;
        for t in terms.iter_mut() {
            let p = it.position(t.step);
            match t.surrogate.increment(p) {
                Ok(inc) => {
                    if inc - t.minorant_increment(p) < -MINORANT_SLACK {
                        t.mu *= 2.0;
                        changed = true;
                    }
                }
                Err(_) => {
                    let z = t.surrogate.sensor;
                    let n = (p - z).normalized().unwrap_or(Vec2::new(1.0, 0.0));
                    let r = t.surrogate.domain_radius(2.0 * DOMAIN_EPS) * (1.0 - 1e-3);
                    cuts.push(PositionConstraint {
                        step: t.step,
                        normal: n,
                        offset: n.dot(z) + r,
                    });
                    t.mu *= 2.0;
                    changed = true;
                }
            }
        }
        if changed {
            continue;
        }

        let value = true_objective(&it, problem, config);
        if value > anchor_objective + ASCENT_SLACK {
            let mut added = false;
            for t in &terms {
                let p = it.position(t.step);
                let zone = problem.sensors[t.sensor]
                    .model
                    .zone_params(p)
                    .map(|z| z.zone);
                if zone != Some(t.surrogate.zone.zone) && confined.insert((t.step, t.sensor)) {
                    added = true;
                }
            }
            if added {
                continue;
            }
        }

        let certificates = terms
            .iter()
            .map(|t| {
                let p = it.position(t.step);
                let base = t.surrogate.anchor_value();
                MinorantCertificate {
                    step: t.step,
                    sensor: t.sensor,
                    minorant: base + t.minorant_increment(p),
                    surrogate: base + t.surrogate.increment(p).unwrap_or(f64::NEG_INFINITY),
                    utility: t.surrogate.frozen_utility(p),
                }
            })
            .collect();
        return Ok(SubOutcome {
            iterate: it,
            objective: value,
            certificates,
        });
    }
    Err(PlannerError::QpNumericalFailure(
        "minorant curvature search did not settle".into(),
    ))
}

fn comm_failure(e: CommError) -> PlannerError {
    PlannerError::QpNumericalFailure(e.to_string())
}

/// One MM step around `anchor`, linearizing the dynamics along the anchor's
/// controls. The anchor's states are re-derived from that model.
pub fn solve_subproblem(
    problem: &PlanProblem,
    config: &PlannerConfig,
    anchor: &PlanResult,
) -> Result<PlanResult, PlannerError> {
    validate_problem(problem, config)?;
    if anchor.controls.len() != config.horizon {
        return Err(PlannerError::LengthMismatch {
            expected: config.horizon,
            found: anchor.controls.len(),
        });
    }
    let frozen = Frozen::at(&problem.current, &anchor.controls, config.tau);
    let u: Vec<f64> = anchor.controls.iter().flat_map(|c| [c.v, c.w]).collect();
    let anchor_it = frozen.iterate(u);
    let p0 = true_objective(&anchor_it, problem, config);
    let out = solve_subproblem_inner(&frozen, problem, config, &anchor_it, p0)?;
    Ok(to_result(
        &out.iterate,
        problem,
        config,
        vec![p0, out.objective],
        PlanStatus::Converged,
        out.certificates,
    ))
}

// ---------------------------------------------------------------------------
// MM loop

pub fn mm_solve(problem: &PlanProblem, config: &PlannerConfig) -> Result<PlanResult, PlannerError> {
    mm_solve_warm(problem, config, None)
}

/// As [`mm_solve`], seeding the linearization with `warm` controls.
pub fn mm_solve_warm(
    problem: &PlanProblem,
    config: &PlannerConfig,
    warm: Option<&[Control]>,
) -> Result<PlanResult, PlannerError> {
    validate_problem(problem, config)?;
    let (frozen, mut it) = initialize_inner(problem, config, warm)?;
    let mut trace = vec![true_objective(&it, problem, config)];
    let mut certificates = Vec::new();
    let mut status = PlanStatus::MaxIters;
    for _ in 0..config.mm_max_iters {
        let prev = *trace.last().unwrap();
        let out = match solve_subproblem_inner(&frozen, problem, config, &it, prev) {
            Ok(out) => out,
            Err(e) => {
                log::warn!("MM subproblem failed, keeping the last iterate: {e}");
                break;
            }
        };
        if out.objective > prev + ASCENT_SLACK {
            log::debug!("MM step rejected: objective {} > {}", out.objective, prev);
            status = PlanStatus::Converged;
            break;
        }
        it = out.iterate;
        certificates = out.certificates;
        trace.push(out.objective);
        if (prev - out.objective).abs() <= config.mm_tol {
            status = PlanStatus::Converged;
            break;
        }
    }
    Ok(to_result(&it, problem, config, trace, status, certificates))
}

/// Stateful planner that warm-starts from its previous plan.
#[derive(Clone, Debug)]
pub struct Planner {
    config: PlannerConfig,
    warm: Option<Vec<Control>>,
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Result<Self, PlannerError> {
        config.validate()?;
        Ok(Self { config, warm: None })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn plan(&mut self, problem: &PlanProblem) -> Result<PlanResult, PlannerError> {
        let result = mm_solve_warm(problem, &self.config, self.warm.as_deref());
        self.warm = result.as_ref().ok().map(|r| {
            let mut shifted = r.controls[1..].to_vec();
            shifted.push(*r.controls.last().unwrap());
            shifted
        });
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::CommParams;
    use crate::dynamics::check_limits_tol;
    use crate::geometry::Shape;
    use crate::radio::{ChannelModel, DistanceModel};
    use approx::assert_abs_diff_eq;

    fn straight_path(len: f64) -> Vec<Pose> {
        vec![Pose::new(0.0, 0.0, 0.0), Pose::new(len, 0.0, 0.0)]
    }

    fn sensor_at(x: f64, y: f64) -> Sensor {
        Sensor {
            position: Vec2::new(x, y),
            params: CommParams::default(),
            model: ChannelModel::Distance(DistanceModel::new(1.6e-4, 2.0)),
        }
    }

    fn body() -> ConvexPolytope {
        ConvexPolytope::centered_box(0.8, 0.5).unwrap()
    }

    fn arc_path(radius: f64, n: usize) -> Vec<Pose> {
        (0..=n)
            .map(|i| {
                let a = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / n as f64;
                Pose::new(
                    radius * a.cos(),
                    radius * a.sin(),
                    a + std::f64::consts::FRAC_PI_2,
                )
            })
            .collect()
    }

    #[test]
    fn reference_on_straight_path() {
        let w = extract_local_reference(&straight_path(10.0), &Pose::default(), 4, 0.5).unwrap();
        assert_eq!(w.states.len(), 5);
        for (h, s) in w.states.iter().enumerate() {
            assert_abs_diff_eq!(s.position.x, 0.5 * h as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(s.position.y, 0.0);
        }
    }

    #[test]
    fn reference_beyond_end_repeats_goal() {
        let path = straight_path(2.0);
        let w = extract_local_reference(&path, &Pose::new(5.0, 1.0, 0.0), 6, 0.3).unwrap();
        assert!(w.states.iter().all(|s| *s == path[1]));
    }

    #[test]
    fn reference_requires_two_waypoints() {
        let e = extract_local_reference(&[Pose::default()], &Pose::default(), 3, 0.1);
        assert_eq!(e.unwrap_err(), PlannerError::EmptyPath);
    }

    #[test]
    fn nearest_point_matches_dense_sampling() {
        let path = arc_path(3.0, 12);
        let arc = ArcPath::new(&path).unwrap();
        let step = 1e-3;
        for p in [
            Vec2::new(0.5, 0.2),
            Vec2::new(4.0, -1.0),
            Vec2::new(-1.0, 3.5),
        ] {
            let s = arc.nearest(p, 0.0, f64::INFINITY);
            let samples = (arc.length() / step) as usize;
            let brute = (0..=samples)
                .map(|i| i as f64 * step)
                .min_by(|a, b| {
                    let da = arc.pose_at(*a).position.distance(p);
                    let db = arc.pose_at(*b).position.distance(p);
                    da.total_cmp(&db)
                })
                .unwrap();
            let d_fast = arc.pose_at(s).position.distance(p);
            let d_brute = arc.pose_at(brute).position.distance(p);
            assert!(d_fast <= d_brute + 1e-12);
            assert!((s - brute).abs() <= step + 1e-9, "{s} vs {brute}");
        }
    }

    #[test]
    fn tracking_cost_examples() {
        let r = ReferenceWindow {
            states: vec![Pose::new(1.0, 2.0, 0.3), Pose::new(2.0, 2.0, 0.0)],
        };
        assert_eq!(tracking_cost(&r.states, &r).unwrap(), 0.0);
        let shifted = vec![r.states[0], Pose::new(3.0, 2.0, 0.0)];
        assert_abs_diff_eq!(tracking_cost(&shifted, &r).unwrap(), 1.0);
        let wrapped = vec![r.states[0], Pose::new(2.0, 2.0, 2.0 * std::f64::consts::PI)];
        assert_abs_diff_eq!(tracking_cost(&wrapped, &r).unwrap(), 0.0, epsilon = 1e-24);
        assert!(matches!(
            tracking_cost(&r.states[..1], &r),
            Err(PlannerError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn regularizer_examples() {
        let s = [sensor_at(0.0, 0.0)];
        let state = [Pose::new(2.0, 0.0, 0.0)];
        assert_eq!(comm_regularizer(&state, &s, 0.0), 0.0);
        let u = comm_utility(&state[0], &s[0]).unwrap();
        assert_abs_diff_eq!(comm_regularizer(&state, &s, 0.7), -0.7 * u);
        assert_abs_diff_eq!(
            comm_regularizer(&state, &s, 1.4),
            2.0 * comm_regularizer(&state, &s, 0.7)
        );
    }

    #[test]
    fn convexify_squares() {
        let unit = ConvexPolytope::centered_box(1.0, 1.0).unwrap();
        let obstacle = Shape::Polygon(unit.clone()).place(&Pose::new(3.0, 0.0, 0.0));
        let rows = convexify_collision(
            &[Pose::default()],
            &unit,
            &[vec![obstacle]],
            0.1,
            CollisionMode::Polytope,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_abs_diff_eq!(rows[0].normal.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[0].normal.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[0].offset, 1.9, epsilon = 1e-12);
    }

    #[test]
    fn convexify_point_mass_circles() {
        let robot = ConvexPolytope::regular(Vec2::ZERO, 1.0, 64).unwrap();
        let obstacle = Shape::Circle { radius: 1.0 }.place(&Pose::new(0.0, 5.0, 0.0));
        let rows = convexify_collision(
            &[Pose::default()],
            &robot,
            &[vec![obstacle]],
            0.1,
            CollisionMode::PointMass,
        )
        .unwrap();
        // half-plane sits 2 + d_safe from the obstacle center
        assert_abs_diff_eq!(5.0 - rows[0].offset, 2.1, epsilon = 1e-12);
    }

    #[test]
    fn convexify_far_obstacle_has_slack_and_overlap_errors() {
        let unit = ConvexPolytope::centered_box(1.0, 1.0).unwrap();
        let far = Shape::Circle { radius: 0.5 }.place(&Pose::new(50.0, 0.0, 0.0));
        let rows = convexify_collision(
            &[Pose::default()],
            &unit,
            &[vec![far]],
            0.1,
            CollisionMode::Polytope,
        )
        .unwrap();
        assert!(rows[0].slack(Vec2::ZERO) > 40.0);
        let near = Shape::Circle { radius: 0.5 }.place(&Pose::new(0.6, 0.0, 0.0));
        assert_eq!(
            convexify_collision(
                &[Pose::default()],
                &unit,
                &[vec![near]],
                0.1,
                CollisionMode::Polytope
            )
            .unwrap_err(),
            PlannerError::ReferenceInCollision {
                obstacle: 0,
                step: 0
            }
        );
    }

    #[test]
    fn baselines() {
        let base = PlannerConfig::default();
        let rda = make_baseline(BaselineKind::Rda, &base);
        assert_eq!(rda.rho, 0.0);
        assert_eq!(rda.collision_mode, CollisionMode::Polytope);
        let pcamp = make_baseline(BaselineKind::Pcamp, &base);
        assert_eq!(pcamp.collision_mode, CollisionMode::PointMass);
        assert!(pcamp.rho > 0.0);
        let sd = make_baseline(BaselineKind::Sdcamp, &base);
        let mp = make_baseline(BaselineKind::Mpcom, &base);
        assert_eq!(
            PlannerConfig {
                comm_mode: CommMode::Multizone,
                ..sd.clone()
            },
            mp
        );
        assert_ne!(sd.comm_mode, mp.comm_mode);
        assert_eq!("SDCAMP".parse::<BaselineKind>(), Ok(BaselineKind::Sdcamp));
        assert!("astar".parse::<BaselineKind>().is_err());
    }

    struct Fixture {
        reference: ReferenceWindow,
        sensors: Vec<Sensor>,
        obstacles: Vec<Vec<PlacedShape>>,
        body: ConvexPolytope,
        current: Pose,
    }

    impl Fixture {
        fn problem(&self) -> PlanProblem<'_> {
            PlanProblem {
                current: self.current,
                previous_control: Control::new(0.8, 0.0),
                reference: &self.reference,
                sensors: &self.sensors,
                obstacles: &self.obstacles,
                robot_body: &self.body,
            }
        }
    }

    fn straight_fixture(config: &PlannerConfig) -> Fixture {
        let current = Pose::default();
        Fixture {
            reference: extract_local_reference(
                &straight_path(20.0),
                &current,
                config.horizon,
                config.lookahead(),
            )
            .unwrap(),
            sensors: vec![],
            obstacles: vec![],
            body: body(),
            current,
        }
    }

    #[test]
    fn initialize_without_eta_tracks_reference() {
        let config = make_baseline(BaselineKind::Rda, &PlannerConfig::default());
        let f = straight_fixture(&config);
        let r = initialize(&f.problem(), &config).unwrap();
        assert_eq!(r.states.len(), config.horizon + 1);
        assert!(r.cost_breakdown.tracking < 1e-8, "{:?}", r.cost_breakdown);
        assert!(check_limits_tol(&r.controls, &config.limits, 1e-9).is_empty());
    }

    #[test]
    fn initialize_sensor_on_path_changes_nothing() {
        let config = PlannerConfig {
            comm_mode: CommMode::Distance,
            ..PlannerConfig::default()
        };
        let mut f = straight_fixture(&config);
        let plain = initialize(
            &f.problem(),
            &PlannerConfig {
                eta: 0.0,
                ..config.clone()
            },
        )
        .unwrap();
        // the pull toward a sensor on the path is symmetric about it: lateral
        // offsets stay zero
        f.sensors = vec![sensor_at(0.4, 0.0)];
        let pulled = initialize(&f.problem(), &PlannerConfig { eta: 5.0, ..config }).unwrap();
        for (a, b) in plain.states.iter().zip(&pulled.states) {
            assert_abs_diff_eq!(a.position.y, b.position.y, epsilon = 1e-9);
        }
    }

    #[test]
    fn initialize_inside_inflated_obstacle_is_infeasible() {
        let config = make_baseline(BaselineKind::Rda, &PlannerConfig::default());
        let mut f = straight_fixture(&config);
        let wall = Shape::Polygon(ConvexPolytope::centered_box(0.2, 6.0).unwrap());
        f.obstacles = vec![vec![
            wall.place(&Pose::new(0.45, 0.0, 0.0));
            config.horizon + 1
        ]];
        f.current = Pose::new(0.0, 0.0, 0.0);
        let err = initialize(&f.problem(), &config).unwrap_err();
        assert!(matches!(err, PlannerError::Infeasible(_)), "{err:?}");
    }

    fn curved_fixture(config: &PlannerConfig) -> Fixture {
        let path = arc_path(4.0, 40);
        let current = Pose::new(4.0, 0.0, std::f64::consts::FRAC_PI_2);
        Fixture {
            reference: extract_local_reference(&path, &current, config.horizon, config.lookahead())
                .unwrap(),
            sensors: vec![sensor_at(0.0, 0.0)],
            obstacles: vec![],
            body: body(),
            current,
        }
    }

    #[test]
    fn comm_pulls_toward_interior_sensor() {
        let base = PlannerConfig {
            comm_mode: CommMode::Distance,
            ..PlannerConfig::default()
        };
        for rho in [0.1, 0.5, 2.0] {
            let cfg = PlannerConfig {
                rho,
                ..base.clone()
            };
            let f = curved_fixture(&cfg);
            let with = mm_solve(&f.problem(), &cfg).unwrap();
            let without = mm_solve(
                &f.problem(),
                &PlannerConfig {
                    rho: 0.0,
                    ..cfg.clone()
                },
            )
            .unwrap();
            let mid = cfg.horizon / 2;
            let d = |r: &PlanResult| r.states[mid].position.norm();
            assert!(
                d(&with) < d(&without),
                "rho {rho}: {} vs {}",
                d(&with),
                d(&without)
            );
        }
    }

    #[test]
    fn mm_trace_is_monotone_with_sandwich() {
        let cfg = PlannerConfig {
            comm_mode: CommMode::Distance,
            rho: 2.0,
            ..PlannerConfig::default()
        };
        let f = curved_fixture(&cfg);
        let r = mm_solve(&f.problem(), &cfg).unwrap();
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{:?}", r.objective_trace);
        }
        assert!(!r.certificates.is_empty());
        for c in &r.certificates {
            assert!(c.minorant <= c.surrogate + 1e-9, "{c:?}");
            assert!(c.surrogate <= c.utility + 1e-9, "{c:?}");
        }
        assert!(check_limits_tol(&r.controls, &cfg.limits, 1e-9).is_empty());
    }

    #[test]
    fn subproblem_at_its_own_solution_is_a_fixed_point() {
        let cfg = PlannerConfig {
            comm_mode: CommMode::Distance,
            ..PlannerConfig::default()
        };
        let f = curved_fixture(&cfg);
        let mut anchor = mm_solve(&f.problem(), &cfg).unwrap();
        let mut step = f64::INFINITY;
        for _ in 0..200 {
            let next = solve_subproblem(&f.problem(), &cfg, &anchor).unwrap();
            let t = &next.objective_trace;
            assert!(t[1] <= t[0] + 1e-8, "{t:?}");
            step = (t[1] - t[0]).abs();
            anchor = next;
            if step < 1e-12 {
                break;
            }
        }
        assert!(step <= cfg.qp_tol, "{step}");
    }

    #[test]
    fn rho_zero_matches_rda() {
        let base = PlannerConfig::default();
        let f = curved_fixture(&base);
        let rda = mm_solve(&f.problem(), &make_baseline(BaselineKind::Rda, &base)).unwrap();
        let zero = mm_solve(&f.problem(), &PlannerConfig { rho: 0.0, ..base }).unwrap();
        assert_eq!(rda.states, zero.states);
        assert_eq!(rda.controls, zero.controls);
    }

    #[test]
    fn plan_result_serializes_deterministically() {
        let cfg = PlannerConfig {
            comm_mode: CommMode::Distance,
            ..PlannerConfig::default()
        };
        let f = curved_fixture(&cfg);
        let a = serde_json::to_string(&mm_solve(&f.problem(), &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&mm_solve(&f.problem(), &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"objective_trace\""));
    }
}
