//! Unicycle kinematics, its first-order expansion and actuation bounds.

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Pose};

/// Linear and angular velocity.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    /// m/s.
    pub v: f64,
    /// rad/s.
    pub w: f64,
}

impl Control {
    pub const ZERO: Control = Control { v: 0.0, w: 0.0 };

    pub const fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.v, self.w)
    }
}

/// Box and rate bounds on controls. Rates are per slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub u_min: Control,
    pub u_max: Control,
    pub a_min: Control,
    pub a_max: Control,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            u_min: Control::new(-0.2, -1.0),
            u_max: Control::new(1.0, 1.0),
            a_min: Control::new(-0.5, -0.5),
            a_max: Control::new(0.5, 0.5),
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<(), String> {
        if self.u_min.v > self.u_max.v || self.u_min.w > self.u_max.w {
            return Err("u_min must not exceed u_max".into());
        }
        if self.a_min.v > self.a_max.v || self.a_min.w > self.a_max.w {
            return Err("a_min must not exceed a_max".into());
        }
        Ok(())
    }

    /// Clamps `u` into the box and within one slot's rate of `previous`,
    /// preferring the box when the two conflict.
    pub fn clamp(&self, u: Control, previous: Control) -> Control {
        let c = |x: f64, prev: f64, lo: f64, hi: f64, alo: f64, ahi: f64| {
            x.clamp(prev + alo, prev + ahi).clamp(lo, hi)
        };
        Control::new(
            c(
                u.v,
                previous.v,
                self.u_min.v,
                self.u_max.v,
                self.a_min.v,
                self.a_max.v,
            ),
            c(
                u.w,
                previous.w,
                self.u_min.w,
                self.u_max.w,
                self.a_min.w,
                self.a_max.w,
            ),
        )
    }
}

/// `s_next = A s + B u + c`, valid near the expansion point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearizedDynamics {
    pub a: Matrix3<f64>,
    pub b: Matrix3x2<f64>,
    pub c: Vector3<f64>,
}

impl LinearizedDynamics {
    /// Applies the affine model to an unwrapped state vector.
    pub fn predict(&self, s: &Vector3<f64>, u: &Control) -> Vector3<f64> {
        self.a * s + self.b * u.as_vector() + self.c
    }
}

pub fn pose_vector(p: &Pose) -> Vector3<f64> {
    Vector3::new(p.position.x, p.position.y, p.heading)
}

/// One slot of unicycle motion; the heading is renormalized.
pub fn step_nonlinear(s: &Pose, u: &Control, tau: f64) -> Pose {
    let (sin, cos) = s.heading.sin_cos();
    Pose::new(
        s.position.x + tau * u.v * cos,
        s.position.y + tau * u.v * sin,
        s.heading + tau * u.w,
    )
}

/// First-order expansion of [`step_nonlinear`] around `(s_ref, u_ref)`.
///
/// The offset is computed with the unwrapped heading so the affine model is
/// continuous across the `+-pi` seam.
pub fn linearize(s_ref: &Pose, u_ref: &Control, tau: f64) -> LinearizedDynamics {
    linearize_vector(&pose_vector(s_ref), u_ref, tau)
}

/// As [`linearize`], for an unwrapped state vector.
pub fn linearize_vector(s: &Vector3<f64>, u: &Control, tau: f64) -> LinearizedDynamics {
    let (sin, cos) = s[2].sin_cos();
    #[rustfmt::skip]
    let a = Matrix3::new(
        1.0, 0.0, -tau * u.v * sin,
        0.0, 1.0,  tau * u.v * cos,
        0.0, 0.0,  1.0,
    );
    #[rustfmt::skip]
    let b = Matrix3x2::new(
        tau * cos, 0.0,
        tau * sin, 0.0,
        0.0,       tau,
    );
    let next = Vector3::new(
        s[0] + tau * u.v * cos,
        s[1] + tau * u.v * sin,
        s[2] + tau * u.w,
    );
    let c = next - a * s - b * u.as_vector();
    LinearizedDynamics { a, b, c }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    LinearVelocity,
    AngularVelocity,
    LinearAcceleration,
    AngularAcceleration,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    /// Index of the offending control (for rates, the later of the pair).
    pub step: usize,
    pub kind: LimitKind,
    /// Amount by which the bound is exceeded.
    pub excess: f64,
}

/// Every box and rate violation in a control sequence. Bounds are inclusive.
pub fn check_limits(controls: &[Control], limits: &Limits) -> Vec<LimitViolation> {
    check_limits_tol(controls, limits, 0.0)
}

/// As [`check_limits`] with an absolute slack.
pub fn check_limits_tol(controls: &[Control], limits: &Limits, tol: f64) -> Vec<LimitViolation> {
    let mut out = Vec::new();
    let mut check = |step: usize, kind: LimitKind, x: f64, lo: f64, hi: f64| {
        let excess = (lo - x).max(x - hi);
        if excess > tol {
            out.push(LimitViolation { step, kind, excess });
        }
    };
    for (i, u) in controls.iter().enumerate() {
        check(
            i,
            LimitKind::LinearVelocity,
            u.v,
            limits.u_min.v,
            limits.u_max.v,
        );
        check(
            i,
            LimitKind::AngularVelocity,
            u.w,
            limits.u_min.w,
            limits.u_max.w,
        );
        if i > 0 {
            let p = controls[i - 1];
            check(
                i,
                LimitKind::LinearAcceleration,
                u.v - p.v,
                limits.a_min.v,
                limits.a_max.v,
            );
            check(
                i,
                LimitKind::AngularAcceleration,
                u.w - p.w,
                limits.a_min.w,
                limits.a_max.w,
            );
        }
    }
    out
}

/// Heading-aware state error used by the tracking cost.
pub fn pose_error_sq(a: &Pose, b: &Pose) -> f64 {
    (a.position - b.position).norm_sq() + normalize_angle(a.heading - b.heading).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_diff;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn step_examples() {
        let s = Pose::new(1.0, -2.0, 0.4);
        assert_eq!(step_nonlinear(&s, &Control::ZERO, 0.1), s);
        let s1 = step_nonlinear(&Pose::default(), &Control::new(1.0, 0.0), 0.1);
        assert_abs_diff_eq!(s1.position.x, 0.1);
        assert_abs_diff_eq!(s1.position.y, 0.0);
        let s2 = step_nonlinear(&Pose::default(), &Control::new(0.0, PI), 1.0);
        assert_abs_diff_eq!(s2.heading, PI, epsilon = 1e-15);
    }

    #[test]
    fn linearization_hand_derivative() {
        let lin = linearize(&Pose::default(), &Control::new(1.0, 0.0), 0.1);
        #[rustfmt::skip]
        let a = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.1, 0.0, 0.0, 1.0);
        #[rustfmt::skip]
        let b = Matrix3x2::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.1);
        assert_abs_diff_eq!(lin.a, a, epsilon = 1e-15);
        assert_abs_diff_eq!(lin.b, b, epsilon = 1e-15);
    }

    #[test]
    fn linearization_exact_at_expansion_point() {
        for (k, th) in [-3.0, -1.0, 0.0, 0.7, 2.9].iter().enumerate() {
            let s = Pose::new(k as f64, -1.5, *th);
            let u = Control::new(0.3 * k as f64 - 0.2, 0.4);
            let lin = linearize(&s, &u, 0.1);
            let pred = lin.predict(&pose_vector(&s), &u);
            let truth = step_nonlinear(&s, &u, 0.1);
            assert!((pred[0] - truth.position.x).abs() <= 1e-12);
            assert!((pred[1] - truth.position.y).abs() <= 1e-12);
            assert!(angle_diff(pred[2], truth.heading).abs() <= 1e-12);
        }
    }

    #[test]
    fn limit_checks() {
        let lim = Limits::default();
        let at_max = vec![lim.u_max; 5];
        assert!(check_limits(&at_max, &lim).is_empty());
        let jump = vec![Control::new(0.0, 0.0), Control::new(0.9, 0.0)];
        let v = check_limits(&jump, &lim);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].step, 1);
        assert_eq!(v[0].kind, LimitKind::LinearAcceleration);
        let tight = Limits {
            u_min: Control::new(0.5, 0.1),
            u_max: Control::new(0.5, 0.1),
            ..lim
        };
        assert!(check_limits(&[Control::new(0.5, 0.1); 3], &tight).is_empty());
    }

    #[test]
    fn clamp_respects_rate_then_box() {
        let lim = Limits::default();
        let u = lim.clamp(Control::new(5.0, -5.0), Control::new(0.2, 0.0));
        assert_abs_diff_eq!(u.v, 0.7);
        assert_abs_diff_eq!(u.w, -0.5);
    }
}
