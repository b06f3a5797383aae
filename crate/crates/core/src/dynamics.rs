//! Two-body elastic pseudo-collision algebra for equal unit masses, plus the
//! conservation diagnostics used throughout the simulator.
//!
//! Balls never move. A collision exchanges the velocity components parallel to
//! the contact direction and leaves the perpendicular components in place,
//! which conserves both momentum and kinetic energy.

use thiserror::Error;

use crate::vec2::Vec2;

/// Default separation below which two centres are treated as coincident.
pub const COINCIDENT_EPS: f64 = 1e-12;

/// Allowed deviation of `|d|` from one for a contact direction.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("points {p1} and {p2} coincide (separation {distance:e} <= {eps:e})")]
    CoincidentPoints {
        p1: Vec2,
        p2: Vec2,
        distance: f64,
        eps: f64,
    },
    #[error("direction {d} is not a unit vector (|d| = {norm})")]
    NonUnitDirection { d: Vec2, norm: f64 },
}

/// Velocities of the two balls taking part in a collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityPair {
    pub v1: Vec2,
    pub v2: Vec2,
}

/// Unit vector pointing from `p2` toward `p1`.
pub fn unit_direction(p1: Vec2, p2: Vec2) -> Result<Vec2, DynamicsError> {
    unit_direction_eps(p1, p2, COINCIDENT_EPS)
}

pub fn unit_direction_eps(p1: Vec2, p2: Vec2, eps: f64) -> Result<Vec2, DynamicsError> {
    let delta = p1 - p2;
    let distance = delta.norm();
    if !(distance > eps) {
        return Err(DynamicsError::CoincidentPoints {
            p1,
            p2,
            distance,
            eps,
        });
    }
    Ok(delta * (1.0 / distance))
}

/// True iff the pair is closing along `d`, i.e. `d . (v1 - v2) < 0`.
///
/// Grazing contact (dot product exactly zero) is not a collision.
#[inline]
pub fn is_approaching(v1: Vec2, v2: Vec2, d: Vec2) -> bool {
    d.dot(v1 - v2) < 0.0
}

/// Exchanges the components of `v1` and `v2` parallel to `d`.
///
/// Unconditional: the caller decides whether the pair is approaching.
pub fn collide(v1: Vec2, v2: Vec2, d: Vec2) -> Result<VelocityPair, DynamicsError> {
    let norm = d.norm();
    if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(DynamicsError::NonUnitDirection { d, norm });
    }
    Ok(collide_unit(v1, v2, d))
}

/// [`collide`] without the unit-direction check. `d` must already be a unit
/// vector; the engine uses this with directions precomputed from the lattice.
#[inline]
pub fn collide_unit(v1: Vec2, v2: Vec2, d: Vec2) -> VelocityPair {
    let v1_par = v1.dot(d) * d;
    let v1_perp = v1 - v1_par;
    let v2_par = v2.dot(d) * d;
    let v2_perp = v2 - v2_par;
    VelocityPair {
        v1: v1_perp + v2_par,
        v2: v2_perp + v1_par,
    }
}

/// Total kinetic energy `1/2 sum |v|^2` with unit masses.
pub fn kinetic_energy(velocities: &[Vec2]) -> f64 {
    0.5 * velocities.iter().map(|v| v.norm_sq()).sum::<f64>()
}

/// Total momentum `sum v` with unit masses.
pub fn total_momentum(velocities: &[Vec2]) -> Vec2 {
    velocities.iter().fold(Vec2::ZERO, |acc, &v| acc + v)
}
