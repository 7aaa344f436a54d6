//! Planar mass on a rough plane, held by a spring-damper in the tangential
//! direction and by gravity against a unilateral contact in the normal one.
//!
//! Coordinates are `q = (q_x, q_y)`. Constraint 0 is the normal contact
//! (acting on `y`), constraint 1 the tangential friction (acting on `x`).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::setvalued::ConvexSet;
use crate::stepper::{MechanicalModel, State};

/// Physical parameters. The friction coefficient is
/// `(mu1 - mu2) / (1 + v_half |v_x|) + mu2 + mu3 sin(omega t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams<T> {
    pub m: T,
    pub g: T,
    pub k1: T,
    pub k2: T,
    pub mu1: T,
    pub mu2: T,
    pub mu3: T,
    pub omega: T,
    /// Velocity scale of the Stribeck-like decay, in s/m.
    pub v_half: T,
}

impl<T: Real> OscillatorParams<T> {
    /// Checks the parameter domain. A zero spring is allowed so that the
    /// spring and damper can be moved into a feedback controller.
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        if !(self.m > z) {
            return Err(Error::param("m", "must be > 0"));
        }
        if !(self.g > z) {
            return Err(Error::param("g", "must be > 0"));
        }
        if !(self.k1 >= z) {
            return Err(Error::param("k1", "must be >= 0"));
        }
        if !(self.k2 >= z) {
            return Err(Error::param("k2", "must be >= 0"));
        }
        if !(self.mu1 >= self.mu2 && self.mu2 >= self.mu3 && self.mu3 >= z) {
            return Err(Error::param("mu", "expected mu1 >= mu2 >= mu3 >= 0"));
        }
        if !(self.v_half >= z) {
            return Err(Error::param("v_half", "must be >= 0"));
        }
        Ok(())
    }

    /// Infimum of the friction coefficient over all velocities and times.
    pub fn mu_lower(&self) -> T {
        self.mu2 - self.mu3
    }

    /// Supremum of the friction coefficient, reached at rest.
    pub fn mu_upper(&self) -> T {
        self.mu1 + self.mu3
    }
}

/// Friction coefficient at `(q_x, v_x, t)`; does not depend on `q_x`.
pub fn friction_coefficient<T: Real>(_qx: T, vx: T, t: T, p: &OscillatorParams<T>) -> T {
    (p.mu1 - p.mu2) / (T::one() + p.v_half * vx.abs()) + p.mu2 + p.mu3 * (p.omega * t).sin()
}

/// Whether static friction can hold the spring force at `q_x` at time `t`.
pub fn stick_band<T: Real>(qx: T, t: T, p: &OscillatorParams<T>) -> bool {
    (p.k1 * qx).abs() <= friction_coefficient(qx, T::zero(), t, p) * p.m * p.g
}

/// `(-k1 q_x - k2 v_x, -m g)`.
pub fn smooth_forces<T: Real>(q: &DVector<T>, v: &DVector<T>, p: &OscillatorParams<T>) -> DVector<T> {
    DVector::from_column_slice(&[-p.k1 * q[0] - p.k2 * v[0], -p.m * p.g])
}

/// Admissible tangential impulse for a step starting at `(q_x, v_x, t)`.
fn tangential_radius<T: Real>(qx: T, vx: T, t: T, dt: T, p: &OscillatorParams<T>) -> T {
    friction_coefficient(qx, vx, t, p) * p.m * p.g * dt
}

/// Sets of the normal and tangential constraint. The normal contact is
/// active when the predicted gap `q_y + gamma v_y dt` is not positive; the
/// friction disc is active only together with it.
pub fn constraint_sets<T: Real>(
    state: &State<T>,
    dt: T,
    gamma: T,
    p: &OscillatorParams<T>,
) -> [Option<ConvexSet<T>>; 2] {
    let q_pred = state.q[1] + gamma * state.v[1] * dt;
    if q_pred <= T::zero() {
        let radius = tangential_radius(state.q[0], state.v[0], state.t, dt, p);
        [Some(ConvexSet::NonNegHalfLine), Some(ConvexSet::Disc(radius))]
    } else {
        [None, None]
    }
}

/// Full two-degree-of-freedom oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillator<T> {
    pub params: OscillatorParams<T>,
}

impl<T: Real> Oscillator<T> {
    pub fn new(params: OscillatorParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl<T: Real> MechanicalModel<T> for Oscillator<T> {
    fn dof(&self) -> usize {
        2
    }

    fn n_constraints(&self) -> usize {
        2
    }

    fn mass_matrix(&self, _q: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_diagonal_element(2, 2, self.params.m)
    }

    fn smooth_forces(&self, q: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        smooth_forces(q, v, &self.params)
    }

    fn constraint_matrix(&self, _q: &DVector<T>) -> DMatrix<T> {
        let (z, o) = (T::zero(), T::one());
        DMatrix::from_row_slice(2, 2, &[z, o, o, z])
    }

    fn constraint_sets(&self, state: &State<T>, dt: T, gamma: T) -> Vec<Option<ConvexSet<T>>> {
        constraint_sets(state, dt, gamma, &self.params).to_vec()
    }

    /// Gravity-compensating normal impulse `m g dt`, zero friction.
    fn initial_impulses(&self, _state: &State<T>, dt: T) -> DVector<T> {
        let p = &self.params;
        DVector::from_column_slice(&[p.m * p.g * dt, T::zero()])
    }

    fn energy(&self, q: &DVector<T>, v: &DVector<T>) -> Option<T> {
        let p = &self.params;
        let half = T::lit(0.5);
        Some(half * p.m * (v[0] * v[0] + v[1] * v[1]) + half * p.k1 * q[0] * q[0] + p.m * p.g * q[1])
    }
}

/// Tangential motion only, with the normal force fixed at `m g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedOscillator<T> {
    pub params: OscillatorParams<T>,
}

impl<T: Real> ReducedOscillator<T> {
    pub fn new(params: OscillatorParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl<T: Real> MechanicalModel<T> for ReducedOscillator<T> {
    fn dof(&self) -> usize {
        1
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn mass_matrix(&self, _q: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_element(1, 1, self.params.m)
    }

    fn smooth_forces(&self, q: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        let p = &self.params;
        DVector::from_element(1, -p.k1 * q[0] - p.k2 * v[0])
    }

    fn constraint_matrix(&self, _q: &DVector<T>) -> DMatrix<T> {
        DMatrix::from_element(1, 1, T::one())
    }

    fn constraint_sets(&self, state: &State<T>, dt: T, _gamma: T) -> Vec<Option<ConvexSet<T>>> {
        let r = tangential_radius(state.q[0], state.v[0], state.t, dt, &self.params);
        vec![Some(ConvexSet::Disc(r))]
    }

    fn energy(&self, q: &DVector<T>, v: &DVector<T>) -> Option<T> {
        let p = &self.params;
        let half = T::lit(0.5);
        Some(half * p.m * v[0] * v[0] + half * p.k1 * q[0] * q[0])
    }
}
