//! Rotary (Furuta) pendulum with annular-bearing friction in both joints.
//!
//! `q = (theta1, theta2)`: arm angle about the vertical axis and pendulum
//! angle, with `theta2 = 0` hanging down and `theta2 = pi` upright. The motor
//! torque acts on the arm only.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::setvalued::ConvexSet;
use crate::stepper::{midpoint_config, MechanicalModel, State};

/// Geometry, inertia and friction data. Lengths in m, masses in kg,
/// inertias in kg m^2 about the centres of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FurutaParams<T> {
    pub l1: T,
    pub c1: T,
    pub l2: T,
    pub c2: T,
    /// Outer and inner radius of the annular bearing surfaces.
    pub r1: T,
    pub r2: T,
    pub m1: T,
    pub m2: T,
    pub j1: T,
    pub j2: T,
    pub g: T,
    /// Coulomb coefficient of both joints.
    pub mu: T,
    /// Lower bounds of the joint normal forces, in N.
    pub lambda_static1: T,
    pub lambda_static2: T,
    /// Per-joint replacement of the bearing's equivalent friction arm.
    pub arm1: Option<T>,
    pub arm2: Option<T>,
}

impl<T: Real> FurutaParams<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        for (name, x) in [
            ("l1", self.l1),
            ("c1", self.c1),
            ("l2", self.l2),
            ("c2", self.c2),
            ("m1", self.m1),
            ("m2", self.m2),
            ("g", self.g),
        ] {
            if !(x > z) {
                return Err(Error::param(name, "must be > 0"));
            }
        }
        for (name, x) in [
            ("j1", self.j1),
            ("j2", self.j2),
            ("mu", self.mu),
            ("lambda_static1", self.lambda_static1),
            ("lambda_static2", self.lambda_static2),
        ] {
            if !(x >= z) {
                return Err(Error::param(name, "must be >= 0"));
            }
        }
        if self.c1 > self.l1 {
            return Err(Error::param("c1", "must not exceed l1"));
        }
        if self.c2 > self.l2 {
            return Err(Error::param("c2", "must not exceed l2"));
        }
        for (name, a) in [("arm1", self.arm1), ("arm2", self.arm2)] {
            if let Some(a) = a {
                if !(a >= z) {
                    return Err(Error::param(name, "must be >= 0"));
                }
            }
        }
        if self.arm1.is_none() || self.arm2.is_none() {
            equivalent_arm(self.r1, self.r2)?;
        }
        Ok(())
    }

    /// Friction arms `(R_E1, R_E2)`.
    pub fn arms(&self) -> Result<(T, T)> {
        let default = || equivalent_arm(self.r1, self.r2);
        let a1 = match self.arm1 {
            Some(a) => a,
            None => default()?,
        };
        let a2 = match self.arm2 {
            Some(a) => a,
            None => default()?,
        };
        Ok((a1, a2))
    }

    /// `m2 c2^2 + J2`, the pendulum inertia about its joint.
    pub fn pendulum_inertia(&self) -> T {
        self.m2 * self.c2 * self.c2 + self.j2
    }
}

/// Arm at which a uniformly pressed annulus with radii `r1 > r2 >= 0`
/// concentrates its friction: `2 (r1^3 - r2^3) / (3 (r1^2 - r2^2))`.
pub fn equivalent_arm<T: Real>(r1: T, r2: T) -> Result<T> {
    if !(r2 >= T::zero()) {
        return Err(Error::param("r2", "must be >= 0"));
    }
    if !(r1 > r2) {
        return Err(Error::param("r1", "must exceed r2"));
    }
    // cancelled form of the quotient, well-conditioned as r2 -> r1
    Ok(T::lit(2.0) * (r1 * r1 + r1 * r2 + r2 * r2) / (T::lit(3.0) * (r1 + r2)))
}

/// Configuration-dependent mass matrix.
pub fn mass_matrix<T: Real>(theta2: T, p: &FurutaParams<T>) -> DMatrix<T> {
    let jp = p.pendulum_inertia();
    let s = theta2.sin();
    let m11 = p.j1 + p.m1 * p.c1 * p.c1 + p.m2 * p.l1 * p.l1 + jp * s * s;
    let m12 = p.m2 * p.l1 * p.c2 * theta2.cos();
    DMatrix::from_row_slice(2, 2, &[m11, m12, m12, jp])
}

/// Coriolis, centrifugal and gravity terms `h(q, v)`.
pub fn h_vector<T: Real>(theta2: T, dtheta1: T, dtheta2: T, p: &FurutaParams<T>) -> DVector<T> {
    let jp = p.pendulum_inertia();
    let s = theta2.sin();
    let s2 = (theta2 + theta2).sin();
    let h1 = dtheta2 * dtheta2 * p.m2 * p.l1 * p.c2 * s - dtheta1 * dtheta2 * s2 * jp;
    let h2 = T::lit(0.5) * dtheta1 * dtheta1 * s2 * jp - p.g * p.m2 * p.c2 * s;
    DVector::from_column_slice(&[h1, h2])
}

/// Normal forces `(N1, N2)` pressing the arm and pendulum bearings.
pub fn normal_forces<T: Real>(theta2: T, dtheta1: T, dtheta2: T, p: &FurutaParams<T>) -> (T, T) {
    let n1 = (p.m1 + p.m2) * p.g + p.m2 * p.c2 * dtheta2 * dtheta2 * theta2.cos();
    let n2 = p.m2 * p.l1 * dtheta1 * dtheta1;
    (n1, n2)
}

/// Bearing loads with the static lower bounds applied.
pub fn bearing_loads<T: Real>(theta2: T, dtheta1: T, dtheta2: T, p: &FurutaParams<T>) -> (T, T) {
    let (n1, n2) = normal_forces(theta2, dtheta1, dtheta2, p);
    (n1.abs().max(p.lambda_static1), n2.abs().max(p.lambda_static2))
}

/// Furuta pendulum with an arm torque supplied by a controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Furuta<T> {
    pub params: FurutaParams<T>,
    arms: (T, T),
}

impl<T: Real> Furuta<T> {
    pub fn new(params: FurutaParams<T>) -> Result<Self> {
        params.validate()?;
        let arms = params.arms()?;
        Ok(Self { params, arms })
    }

    /// Friction arms in use.
    pub fn arms(&self) -> (T, T) {
        self.arms
    }

    /// Disc radii (friction torque times `dt`) of both joints for the step
    /// starting at `state`. Loads use the midpoint angle and start velocities.
    pub fn friction_radii(&self, state: &State<T>, dt: T) -> (T, T) {
        let p = &self.params;
        let q_mid = midpoint_config(state, dt);
        let (b1, b2) = bearing_loads(q_mid[1], state.v[0], state.v[1], p);
        (p.mu * b1 * self.arms.0 * dt, p.mu * b2 * self.arms.1 * dt)
    }

    /// Potential energy, zero when hanging.
    pub fn potential_energy(&self, theta2: T) -> T {
        let p = &self.params;
        p.g * p.m2 * p.c2 * (T::one() - theta2.cos())
    }
}

impl<T: Real> MechanicalModel<T> for Furuta<T> {
    fn dof(&self) -> usize {
        2
    }

    fn n_constraints(&self) -> usize {
        2
    }

    fn mass_matrix(&self, q: &DVector<T>) -> DMatrix<T> {
        mass_matrix(q[1], &self.params)
    }

    fn smooth_forces(&self, q: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        h_vector(q[1], v[0], v[1], &self.params)
    }

    fn constraint_matrix(&self, _q: &DVector<T>) -> DMatrix<T> {
        DMatrix::identity(2, 2)
    }

    fn constraint_sets(&self, state: &State<T>, dt: T, _gamma: T) -> Vec<Option<ConvexSet<T>>> {
        let (a, b) = self.friction_radii(state, dt);
        vec![Some(ConvexSet::Disc(a)), Some(ConvexSet::Disc(b))]
    }

    fn energy(&self, q: &DVector<T>, v: &DVector<T>) -> Option<T> {
        let m = mass_matrix(q[1], &self.params);
        let kinetic = T::lit(0.5) * v.dot(&(m * v));
        Some(kinetic + self.potential_energy(q[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    pub(crate) fn params() -> FurutaParams<f64> {
        FurutaParams {
            l1: 0.435,
            c1: 0.217,
            l2: 0.2,
            c2: 0.19,
            r1: 0.08,
            r2: 0.03,
            m1: 0.4,
            m2: 0.55,
            j1: 0.027,
            j2: 0.021,
            g: 9.81,
            mu: 0.25,
            lambda_static1: 12.0,
            lambda_static2: 3.0,
            arm1: None,
            arm2: None,
        }
    }

    #[test]
    fn equivalent_arm_values() {
        assert_relative_eq!(equivalent_arm(0.08, 0.03).unwrap(), 0.0587878787878788, epsilon = 1e-12);
        assert_relative_eq!(equivalent_arm(1.0, 0.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        let near = equivalent_arm(1.0f64, 1.0 - 1e-12).unwrap();
        assert!((near - 1.0).abs() < 1e-11);
        assert!(equivalent_arm(0.03, 0.08).is_err());
        assert!(equivalent_arm(0.05, 0.05).is_err());
        assert!(equivalent_arm(0.05, -0.01).is_err());
    }

    /// Friction torque over load of a uniformly pressed annulus, summed on
    /// a polar grid: composite Simpson in `r`, rectangles in `phi`.
    fn quadrature_arm(r1: f64, r2: f64, n: usize) -> f64 {
        let dr = (r1 - r2) / n as f64;
        let dphi = 2.0 * PI / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..n {
            for i in 0..=n {
                let r = r2 + i as f64 * dr;
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                } * dr / 3.0;
                // dA = r dr dphi, torque arm r
                num += w * r * r * dphi;
                den += w * r * dphi;
            }
        }
        num / den
    }

    #[test]
    fn equivalent_arm_matches_quadrature() {
        for (r1, r2) in [(0.08, 0.03), (1.0, 0.0), (0.5, 0.45)] {
            let q = quadrature_arm(r1, r2, 400);
            let exact = equivalent_arm(r1, r2).unwrap();
            assert!((q - exact).abs() < 1e-10, "{r1} {r2}: {q} vs {exact}");
        }
    }

    #[test]
    fn mass_matrix_hanging() {
        let m = mass_matrix(0.0, &params());
        assert_relative_eq!(m[(0, 0)], 0.14990935, epsilon = 1e-10);
        assert_relative_eq!(m[(0, 1)], 0.0454575, epsilon = 1e-10);
        assert_relative_eq!(m[(1, 0)], 0.0454575, epsilon = 1e-10);
        assert_relative_eq!(m[(1, 1)], 0.040855, epsilon = 1e-10);
    }

    #[test]
    fn mass_matrix_is_spd() {
        let p = params();
        for i in 0..360 {
            let m = mass_matrix(i as f64 * PI / 180.0, &p);
            assert_eq!(m, m.transpose());
            assert!(m.cholesky().is_some());
        }
    }

    #[test]
    fn h_vector_at_rest() {
        let p = params();
        assert_eq!(h_vector(0.0, 0.0, 0.0, &p).as_slice(), &[0.0, 0.0]);
        let h = h_vector(PI / 2.0, 0.0, 0.0, &p);
        assert_relative_eq!(h[1], -9.81 * 0.55 * 0.19, epsilon = 1e-12);
        assert_relative_eq!(h[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn normal_force_values() {
        let p = params();
        let (n1, n2) = normal_forces(0.0, 0.0, 0.0, &p);
        assert_relative_eq!(n1, 0.95 * 9.81, epsilon = 1e-12);
        assert_eq!(n2, 0.0);
        assert_eq!(bearing_loads(0.0, 0.0, 0.0, &p), (12.0, 3.0));
        let (b1, b2) = bearing_loads(0.0, 10.0, 20.0, &p);
        assert_relative_eq!(b1, 0.95 * 9.81 + 0.55 * 0.19 * 400.0, epsilon = 1e-12);
        assert_relative_eq!(b2, 0.55 * 0.435 * 100.0, epsilon = 1e-12);
    }

    #[test]
    fn friction_radii_use_arms_and_dt() {
        let model = Furuta::new(params()).unwrap();
        let s = State::from_slices(&[0.0, 0.0], &[0.0, 0.0], 0.0);
        let (a, b) = model.friction_radii(&s, 1e-3);
        let re = equivalent_arm(0.08, 0.03).unwrap();
        assert_relative_eq!(a, 0.25 * 12.0 * re * 1e-3, epsilon = 1e-15);
        assert_relative_eq!(b, 0.25 * 3.0 * re * 1e-3, epsilon = 1e-15);

        let custom = Furuta::new(FurutaParams { arm2: Some(0.01), ..params() }).unwrap();
        let (_, b) = custom.friction_radii(&s, 1e-3);
        assert_relative_eq!(b, 0.25 * 3.0 * 0.01 * 1e-3, epsilon = 1e-15);
    }

    #[test]
    fn energy_hanging_and_upright() {
        let model = Furuta::new(params()).unwrap();
        let zero = DVector::from_column_slice(&[0.0, 0.0]);
        assert_eq!(model.energy(&zero, &zero), Some(0.0));
        let up = DVector::from_column_slice(&[0.0, PI]);
        assert_relative_eq!(model.energy(&up, &zero).unwrap(), 2.0 * 9.81 * 0.55 * 0.19, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Furuta::new(FurutaParams { m2: 0.0, ..params() }).is_err());
        assert!(Furuta::new(FurutaParams { c2: 0.3, ..params() }).is_err());
        assert!(Furuta::new(FurutaParams { r2: 0.1, ..params() }).is_err());
        // explicit arms make the radii irrelevant
        assert!(Furuta::new(FurutaParams { r2: 0.1, arm1: Some(0.05), arm2: Some(0.05), ..params() }).is_ok());
    }
}
