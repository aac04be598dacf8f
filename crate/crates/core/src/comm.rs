//! Link budget, per-slot harvested bits and the concave minorizer of the
//! communication utility used by the planner.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Vec2};
use crate::radio::{ChannelModel, RadioError, ZoneParams};

/// Lower bound on the surrogate's log argument.
pub const DOMAIN_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommError {
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error("surrogate log argument {argument:e} is outside the domain")]
    DomainViolation { argument: f64 },
}

/// Link constants for one sensor. SI units throughout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommParams {
    /// Watts.
    pub transmit_power: f64,
    /// Watts, interference included.
    pub noise_power: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Seconds.
    pub slot: f64,
}

impl Default for CommParams {
    /// 2 mW transmitter, -50 dBm noise, 0.1 MHz bandwidth, 0.1 s slots.
    fn default() -> Self {
        Self {
            transmit_power: 2e-3,
            noise_power: 1e-8,
            bandwidth: 1e5,
            slot: 0.1,
        }
    }
}

impl CommParams {
    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.transmit_power) && ok(self.noise_power) && ok(self.bandwidth) && ok(self.slot) {
            Ok(())
        } else {
            Err(format!(
                "communication parameters must be positive: {self:?}"
            ))
        }
    }

    /// Bits per slot per unit of spectral efficiency.
    pub fn bits_per_slot_per_bps_hz(&self) -> f64 {
        self.slot * self.bandwidth
    }
}

/// A data source together with the channel model the planner believes in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub position: Vec2,
    pub params: CommParams,
    pub model: ChannelModel,
}

pub fn snr(gain: f64, params: &CommParams) -> f64 {
    gain * params.transmit_power / params.noise_power
}

/// Shannon spectral efficiency in bps/Hz.
pub fn spectral_efficiency(gain: f64, params: &CommParams) -> f64 {
    snr(gain, params).ln_1p() / LN_2
}

/// Bits harvested in one slot at the given gain.
pub fn bits_per_slot(gain: f64, params: &CommParams) -> f64 {
    params.bits_per_slot_per_bps_hz() * spectral_efficiency(gain, params)
}

/// Bits harvested from `sensor` during one slot spent at `state`.
pub fn comm_utility(state: &Pose, sensor: &Sensor) -> Result<f64, CommError> {
    let gain = sensor.model.gain(state.position, sensor.position)?;
    Ok(bits_per_slot(gain, &sensor.params))
}

/// The minorizer of one sensor's utility, built at an anchor position with the
/// anchor's zone frozen.
///
/// With `D = max(d, d_min)` and `y = D*^alpha` the value is
/// `tau B log2(1 + c (2/y - D^alpha / y^2))`, `c = beta p / sigma^2`. It lower-bounds
/// the utility wherever the argument is positive, touches it (value and gradient)
/// at the anchor, and is concave in position for `alpha >= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateTerm {
    pub sensor: Vec2,
    pub zone: ZoneParams,
    pub anchor: Vec2,
    /// `beta p / sigma^2`.
    coef: f64,
    /// `max(d*, d_min)^alpha`.
    y: f64,
    d_min: f64,
    /// `tau B`.
    scale: f64,
}

impl SurrogateTerm {
    pub fn new(
        anchor: Vec2,
        sensor: Vec2,
        zone: ZoneParams,
        params: &CommParams,
        d_min: f64,
    ) -> Self {
        let d_star = anchor.distance(sensor).max(d_min);
        Self {
            sensor,
            zone,
            anchor,
            coef: zone.beta * params.transmit_power / params.noise_power,
            y: d_star.powf(zone.alpha),
            d_min,
            scale: params.bits_per_slot_per_bps_hz(),
        }
    }

    /// Builds the term at `anchor`, freezing the zone the anchor lies in.
    pub fn at_anchor(anchor: Vec2, sensor: &Sensor) -> Result<Self, CommError> {
        let zone = sensor
            .model
            .zone_params(anchor)
            .ok_or(RadioError::OutsideAllZones {
                x: anchor.x,
                y: anchor.y,
            })?;
        Ok(Self::new(
            anchor,
            sensor.position,
            zone,
            &sensor.params,
            sensor.model.d_min(),
        ))
    }

    fn clamped_distance(&self, p: Vec2) -> f64 {
        p.distance(self.sensor).max(self.d_min)
    }

    /// `c (2/y - D^alpha / y^2)`, the log argument minus one.
    fn bracket(&self, p: Vec2) -> f64 {
        let dpow = self.clamped_distance(p).powf(self.zone.alpha);
        self.coef * (2.0 / self.y - dpow / (self.y * self.y))
    }

    pub fn log_argument(&self, p: Vec2) -> f64 {
        1.0 + self.bracket(p)
    }

    /// Surrogate value in bits, or `DomainViolation` when the argument is too small.
    pub fn value(&self, p: Vec2) -> Result<f64, CommError> {
        let bracket = self.bracket(p);
        if 1.0 + bracket <= DOMAIN_EPS {
            return Err(CommError::DomainViolation {
                argument: 1.0 + bracket,
            });
        }
        // Far from the sensor the bracket is tiny; ln_1p keeps its digits.
        Ok(self.scale * bracket.ln_1p() / LN_2)
    }

    /// `value(p) - value(anchor)`, computed without cancellation.
    pub fn increment(&self, p: Vec2) -> Result<f64, CommError> {
        let arg = self.log_argument(p);
        if arg <= DOMAIN_EPS {
            return Err(CommError::DomainViolation { argument: arg });
        }
        let dpow = self.clamped_distance(p).powf(self.zone.alpha);
        let anchor_arg = 1.0 + self.coef / self.y;
        let rel = -self.coef * (dpow - self.y) / (self.y * self.y * anchor_arg);
        Ok(self.scale * rel.ln_1p() / LN_2)
    }

    /// Value at the anchor, which equals the frozen utility there.
    pub fn anchor_value(&self) -> f64 {
        self.scale * (self.coef / self.y).ln_1p() / LN_2
    }

    /// Utility under the frozen zone, evaluated at `p` (bits).
    pub fn frozen_utility(&self, p: Vec2) -> f64 {
        let g = self.zone.beta * self.clamped_distance(p).powf(-self.zone.alpha);
        self.scale * (self.coef / self.zone.beta * g).ln_1p() / LN_2
    }

    /// Positional gradient of the surrogate in bits per meter.
    pub fn gradient(&self, p: Vec2) -> Result<Vec2, CommError> {
        let arg = self.log_argument(p);
        if arg <= DOMAIN_EPS {
            return Err(CommError::DomainViolation { argument: arg });
        }
        let r = p - self.sensor;
        let d = r.norm();
        if d <= self.d_min || self.zone.alpha == 0.0 {
            return Ok(Vec2::ZERO);
        }
        let a = self.zone.alpha;
        let darg = -self.coef * a * d.powf(a - 1.0) / (self.y * self.y);
        Ok(r * (self.scale / LN_2 * darg / (arg * d)))
    }

    /// Positional Hessian `[[xx, xy], [xy, yy]]` in bits per square meter.
    pub fn hessian(&self, p: Vec2) -> Result<[[f64; 2]; 2], CommError> {
        let arg = self.log_argument(p);
        if arg <= DOMAIN_EPS {
            return Err(CommError::DomainViolation { argument: arg });
        }
        let r = p - self.sensor;
        let d = r.norm();
        if d <= self.d_min || self.zone.alpha == 0.0 {
            return Ok([[0.0; 2]; 2]);
        }
        let a = self.zone.alpha;
        let k = self.coef / (self.y * self.y);
        let d1 = -k * a * d.powf(a - 1.0);
        let d2 = -k * a * (a - 1.0) * d.powf(a - 2.0);
        let radial = d2 / arg - (d1 / arg).powi(2);
        let tangential = d1 / (arg * d);
        let u = r / d;
        let s = self.scale / LN_2;
        let h = |i: f64, j: f64, delta: f64| s * (radial * i * j + tangential * (delta - i * j));
        Ok([
            [h(u.x, u.x, 1.0), h(u.x, u.y, 0.0)],
            [h(u.y, u.x, 0.0), h(u.y, u.y, 1.0)],
        ])
    }

    /// Largest clamped sensor distance at which the log argument still reaches `floor`.
    pub fn domain_radius(&self, floor: f64) -> f64 {
        if self.zone.alpha <= 0.0 {
            return f64::INFINITY;
        }
        let bound = self.y * self.y * (1.0 - floor) / self.coef + 2.0 * self.y;
        bound.powf(1.0 / self.zone.alpha)
    }
}

/// Surrogate of `comm_utility(state)` built at `anchor`.
pub fn surrogate(state: &Pose, anchor: &Pose, sensor: &Sensor) -> Result<f64, CommError> {
    SurrogateTerm::at_anchor(anchor.position, sensor)?.value(state.position)
}

/// Gradient of the surrogate with respect to `(x, y, theta)`; the heading entry is 0.
pub fn surrogate_gradient(
    state: &Pose,
    anchor: &Pose,
    sensor: &Sensor,
) -> Result<[f64; 3], CommError> {
    let g = SurrogateTerm::at_anchor(anchor.position, sensor)?.gradient(state.position)?;
    Ok([g.x, g.y, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexPolytope;
    use crate::radio::{DistanceModel, MultiZoneModel};
    use approx::assert_relative_eq;

    fn los_sensor(rho0: f64, lambda: f64) -> Sensor {
        Sensor {
            position: Vec2::new(1.0, -2.0),
            params: CommParams::default(),
            model: ChannelModel::Distance(DistanceModel::new(rho0, lambda)),
        }
    }

    #[test]
    fn snr_examples() {
        let p = CommParams::default();
        assert_relative_eq!(snr(p.noise_power / p.transmit_power, &p), 1.0);
        assert_relative_eq!(snr(5e-6, &p), 1.0, max_relative = 1e-12);
        assert_relative_eq!(snr(1e-5, &p), 2.0 * snr(5e-6, &p));
    }

    #[test]
    fn spectral_efficiency_examples() {
        let p = CommParams::default();
        let unit = p.noise_power / p.transmit_power;
        assert_relative_eq!(spectral_efficiency(unit, &p), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            spectral_efficiency(3.0 * unit, &p),
            2.0,
            max_relative = 1e-14
        );
        assert!(spectral_efficiency(1e-300, &p) < 1e-200);
    }

    #[test]
    fn utility_bookkeeping() {
        let p = CommParams::default();
        let unit = p.noise_power / p.transmit_power;
        let bits = bits_per_slot(unit, &p);
        assert_relative_eq!(bits, 1e4, max_relative = 1e-12);
        assert_relative_eq!(bits / 8e6, 1.25e-3, max_relative = 1e-12);
    }

    #[test]
    fn utility_decreases_with_distance_in_los() {
        let s = los_sensor(1e-3, 2.2);
        let mut last = f64::INFINITY;
        for k in 1..40 {
            let r = 0.5 + 0.25 * k as f64;
            let u = comm_utility(&Pose::new(s.position.x + r, s.position.y, 0.3), &s).unwrap();
            assert!(u < last);
            last = u;
        }
    }

    #[test]
    fn utility_is_heading_invariant() {
        let s = los_sensor(1e-3, 3.0);
        let a = comm_utility(&Pose::new(3.0, 1.0, 0.0), &s).unwrap();
        let b = comm_utility(&Pose::new(3.0, 1.0, 2.5), &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn surrogate_tight_at_anchor() {
        let s = los_sensor(1e-3, 2.7);
        let anchor = Pose::new(4.0, 2.0, 0.1);
        let exact = comm_utility(&anchor, &s).unwrap();
        assert_relative_eq!(
            surrogate(&anchor, &anchor, &s).unwrap(),
            exact,
            max_relative = 1e-12
        );
    }

    #[test]
    fn surrogate_boundary_case() {
        // d^alpha = 2 d*^alpha zeroes the bracket; at the anchor it equals d*^-alpha
        let s = los_sensor(1e-3, 2.0);
        let anchor = Pose::new(s.position.x + 3.0, s.position.y, 0.0);
        let term = SurrogateTerm::at_anchor(anchor.position, &s).unwrap();
        let d = 3.0 * 2f64.sqrt();
        let p = Vec2::new(s.position.x, s.position.y + d);
        let c = 1e-3 * 2e-3 / 1e-8;
        assert_relative_eq!(term.log_argument(p), 1.0, max_relative = 1e-12);
        assert_relative_eq!(term.value(p).unwrap(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(
            term.log_argument(anchor.position),
            1.0 + c / 9.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn surrogate_domain_violation() {
        let s = los_sensor(1e-3, 2.0);
        let anchor = Pose::new(s.position.x + 1.0, s.position.y, 0.0);
        let far = Pose::new(s.position.x + 500.0, s.position.y, 0.0);
        assert!(matches!(
            surrogate(&far, &anchor, &s),
            Err(CommError::DomainViolation { .. })
        ));
        let term = SurrogateTerm::at_anchor(anchor.position, &s).unwrap();
        let r = term.domain_radius(DOMAIN_EPS);
        let edge = Vec2::new(s.position.x + r * 0.999, s.position.y);
        assert!(term.value(edge).is_ok());
    }

    #[test]
    fn gradient_mirrors_under_reflection() {
        let s = los_sensor(1e-3, 2.5);
        let anchor = Pose::new(s.position.x + 2.0, s.position.y + 1.0, 0.0);
        let mirrored = Pose::new(s.position.x - 2.0, s.position.y - 1.0, 0.0);
        let g = surrogate_gradient(&anchor, &anchor, &s).unwrap();
        let gm = surrogate_gradient(&mirrored, &mirrored, &s).unwrap();
        assert_relative_eq!(g[0], -gm[0], max_relative = 1e-12);
        assert_relative_eq!(g[1], -gm[1], max_relative = 1e-12);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn surrogate_requires_anchor_in_zone() {
        let s = Sensor {
            position: Vec2::ZERO,
            params: CommParams::default(),
            model: ChannelModel::MultiZone(MultiZoneModel {
                zones: vec![
                    ConvexPolytope::rectangle(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0)).unwrap(),
                ],
                beta: vec![1e-3],
                alpha: vec![2.0],
                sensor: Vec2::ZERO,
                d_min: 0.5,
            }),
        };
        let out = Pose::new(5.0, 0.0, 0.0);
        assert!(matches!(
            surrogate(&out, &out, &s),
            Err(CommError::Radio(RadioError::OutsideAllZones { .. }))
        ));
    }
}
