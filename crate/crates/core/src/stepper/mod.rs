//! Moreau midpoint time-stepping on velocity-impulse level.
//!
//! One step evaluates mass matrix, smooth forces and constraint directions at
//! the midpoint configuration `q_n + dt/2 * v_n`, solves the per-step
//! impulses `Lambda_{n+1}` from their prox equations by a projected fixed-point
//! iteration, then updates
//!
//! ```text
//! v_{n+1} = v_n + M^-1 ((h + u) dt + W Lambda_{n+1})
//! q_{n+1} = q_n + (v_n + v_{n+1}) / 2 * dt
//! ```
//!
//! `h` takes `v_n` by default; see [`ForceVelocity`].

pub(crate) mod integrate;

pub use integrate::{advance, integrate, Controller, NoControl, Trajectory};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::setvalued::{prox, prox_residual, Branch, ConvexSet};

/// Generalized positions, velocities and clock of a mechanical system.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T: Real> {
    pub q: DVector<T>,
    pub v: DVector<T>,
    pub t: T,
}

impl<T: Real> State<T> {
    pub fn new(q: DVector<T>, v: DVector<T>, t: T) -> Self {
        assert_eq!(q.len(), v.len(), "q and v must have the same length");
        Self { q, v, t }
    }

    pub fn from_slices(q: &[T], v: &[T], t: T) -> Self {
        Self::new(DVector::from_column_slice(q), DVector::from_column_slice(v), t)
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.q.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
    }
}

/// A rigid system with constraints that the stepper can integrate.
///
/// Constraint `k` acts along column `k` of the constraint matrix `W`; its
/// relative velocity is `(W^T v)_k` and its law is given by the set returned
/// from [`constraint_sets`](MechanicalModel::constraint_sets). Sets carry
/// impulse units, i.e. friction radii are already multiplied by `dt`.
pub trait MechanicalModel<T: Real> {
    fn dof(&self) -> usize;

    fn n_constraints(&self) -> usize;

    /// Symmetric positive-definite mass matrix.
    fn mass_matrix(&self, q: &DVector<T>) -> DMatrix<T>;

    /// Generalized smooth forces `h(q, v)`.
    fn smooth_forces(&self, q: &DVector<T>, v: &DVector<T>) -> DVector<T>;

    /// `dof x n_constraints` matrix of constraint directions.
    fn constraint_matrix(&self, q: &DVector<T>) -> DMatrix<T>;

    /// Convex set of every constraint for the step starting at `state`;
    /// `None` marks an open (inactive) constraint whose impulse is zero.
    fn constraint_sets(&self, state: &State<T>, dt: T, gamma: T) -> Vec<Option<ConvexSet<T>>>;

    /// Generalized input applied by the model itself (actuators that are not
    /// part of a controller).
    fn control_input(&self, state: &State<T>) -> DVector<T> {
        DVector::zeros(state.dof())
    }

    /// Starting point of the impulse iteration.
    fn initial_impulses(&self, _state: &State<T>, _dt: T) -> DVector<T> {
        DVector::zeros(self.n_constraints())
    }

    /// Total mechanical energy, when the model defines one.
    fn energy(&self, _q: &DVector<T>, _v: &DVector<T>) -> Option<T> {
        None
    }
}

impl<T: Real, M: MechanicalModel<T> + ?Sized> MechanicalModel<T> for &M {
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn n_constraints(&self) -> usize {
        (**self).n_constraints()
    }
    fn mass_matrix(&self, q: &DVector<T>) -> DMatrix<T> {
        (**self).mass_matrix(q)
    }
    fn smooth_forces(&self, q: &DVector<T>, v: &DVector<T>) -> DVector<T> {
        (**self).smooth_forces(q, v)
    }
    fn constraint_matrix(&self, q: &DVector<T>) -> DMatrix<T> {
        (**self).constraint_matrix(q)
    }
    fn constraint_sets(&self, state: &State<T>, dt: T, gamma: T) -> Vec<Option<ConvexSet<T>>> {
        (**self).constraint_sets(state, dt, gamma)
    }
    fn control_input(&self, state: &State<T>) -> DVector<T> {
        (**self).control_input(state)
    }
    fn initial_impulses(&self, state: &State<T>, dt: T) -> DVector<T> {
        (**self).initial_impulses(state, dt)
    }
    fn energy(&self, q: &DVector<T>, v: &DVector<T>) -> Option<T> {
        (**self).energy(q, v)
    }
}

/// Integrator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig<T> {
    /// Fixed step size.
    pub dt: T,
    /// Prox parameter per constraint. `None` uses `1 / (W^T M^-1 W)_kk`.
    pub r_init: Option<Vec<T>>,
    /// Convergence bound on the largest impulse change of one sweep.
    pub tol: T,
    /// Sweeps before the prox parameters are halved; the solve gives up after `2 * j_max`.
    pub j_max: usize,
    /// Prediction weight for unilateral contact activation.
    pub gamma: T,
    /// Kinematic restitution applied to unilateral constraints.
    pub restitution: T,
    /// Velocities at or below this magnitude count as sticking.
    pub stick_tol: T,
    /// Velocity argument of the smooth forces.
    pub force_velocity: ForceVelocity,
}

/// Where the velocity argument of `h(q_mid, v)` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceVelocity {
    /// `v_n`, fully explicit.
    #[default]
    Start,
    /// `(v_n + v_{n+1}) / 2`, found by fixed-point iteration around the
    /// impulse solve. Removes the first-order energy drift of
    /// velocity-dependent forces.
    Midpoint,
}

/// Fixed-point passes allowed for [`ForceVelocity::Midpoint`].
const MIDPOINT_PASSES: usize = 50;

impl<T: Real> Default for StepperConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            r_init: None,
            tol: T::lit(1e-12),
            j_max: 100,
            gamma: T::lit(0.5),
            restitution: T::zero(),
            stick_tol: T::lit(1e-8),
            force_velocity: ForceVelocity::Start,
        }
    }
}

impl<T: Real> StepperConfig<T> {
    pub fn with_dt(dt: T) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::param("dt", "must be finite and > 0"));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::param("tol", "must be > 0"));
        }
        if self.j_max < 1 {
            return Err(Error::param("j_max", "must be >= 1"));
        }
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return Err(Error::param("gamma", "must lie in [0, 1]"));
        }
        if !(self.restitution >= T::zero() && self.restitution <= T::one()) {
            return Err(Error::param("restitution", "must lie in [0, 1]"));
        }
        if !(self.stick_tol >= T::zero()) {
            return Err(Error::param("stick_tol", "must be >= 0"));
        }
        if let Some(r) = &self.r_init {
            if r.iter().any(|&x| !(x > T::zero())) {
                return Err(Error::param("r_init", "every entry must be > 0"));
            }
        }
        Ok(())
    }
}

/// Contact state of a constraint at the end of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    /// Closed / sticking: zero relative velocity, impulse inside its set.
    Stick,
    /// Sliding with positive relative velocity; impulse at `-radius`.
    SlipPos,
    /// Sliding with negative relative velocity; impulse at `+radius`.
    SlipNeg,
    /// Open contact, zero impulse.
    Open,
}

impl ConstraintMode {
    pub fn is_slip(self) -> bool {
        matches!(self, ConstraintMode::SlipPos | ConstraintMode::SlipNeg)
    }
}

/// Outcome of the per-step impulse iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSolveReport<T: Real> {
    pub impulses: DVector<T>,
    /// Sweeps performed.
    pub iterations: usize,
    /// Largest impulse change of the last sweep.
    pub residual_norm: T,
    pub converged: bool,
    pub modes: Vec<ConstraintMode>,
    /// Constraint velocities `W^T v_{n+1}` at the returned impulses.
    pub gdot: DVector<T>,
    /// Active convex sets used in the solve.
    pub sets: Vec<Option<ConvexSet<T>>>,
}

/// `q_n + dt/2 * v_n`.
pub fn midpoint_config<T: Real>(state: &State<T>, dt: T) -> DVector<T> {
    &state.q + &state.v * (dt * T::lit(0.5))
}

pub(crate) fn factor<T: Real>(m: DMatrix<T>) -> Result<Cholesky<T, Dyn>> {
    Cholesky::new(m).ok_or(Error::Singular("mass matrix"))
}

/// Everything one step needs, evaluated at the midpoint.
struct MidpointSolve<T: Real> {
    report: ImpulseSolveReport<T>,
    v_next: DVector<T>,
}

fn solve_midpoint<M, T>(
    model: &M,
    state: &State<T>,
    cfg: &StepperConfig<T>,
    u: &DVector<T>,
) -> Result<MidpointSolve<T>>
where
    T: Real,
    M: MechanicalModel<T> + ?Sized,
{
    let dt = cfg.dt;
    let q_mid = midpoint_config(state, dt);
    let chol = factor(model.mass_matrix(&q_mid))?;
    let input = model.control_input(state) + u;
    let w = model.constraint_matrix(&q_mid);
    let sets = model.constraint_sets(state, dt, cfg.gamma);
    let m = w.ncols();
    if sets.len() != m {
        return Err(Error::param(
            "constraint_sets",
            format!("model returned {} sets for {} constraints", sets.len(), m),
        ));
    }
    let minv_w = chol.solve(&w);
    let delassus = w.transpose() * &minv_w;
    let gdot_minus = w.transpose() * &state.v;

    let r0: Vec<T> = match &cfg.r_init {
        Some(r) if r.len() == m => r.clone(),
        Some(r) => {
            return Err(Error::param(
                "r_init",
                format!("{} entries for {} constraints", r.len(), m),
            ))
        }
        None => (0..m)
            .map(|k| {
                let g = delassus[(k, k)];
                if g > T::zero() {
                    T::one() / g
                } else {
                    T::one()
                }
            })
            .collect(),
    };

    // unilateral constraints aim at gdot+ = -eps * gdot-
    let bias: Vec<T> = (0..m)
        .map(|k| match sets[k] {
            Some(ConvexSet::NonNegHalfLine) => cfg.restitution * gdot_minus[k],
            _ => T::zero(),
        })
        .collect();

    let mut lambda0 = model.initial_impulses(state, dt);
    for (k, s) in sets.iter().enumerate() {
        if s.is_none() {
            lambda0[k] = T::zero();
        }
    }

    let solve = |v_eval: &DVector<T>| -> Result<MidpointSolve<T>> {
        let h = model.smooth_forces(&q_mid, v_eval) + &input;
        let v_free = &state.v + chol.solve(&(h * dt));
        let gdot_free = w.transpose() * &v_free;
        let mut r = r0.clone();
        let mut lambda = lambda0.clone();

        let mut iterations = 0;
        let mut sigma = T::zero();
        let mut converged = false;
        while iterations < 2 * cfg.j_max {
            iterations += 1;
            let mut gdot = &gdot_free + &delassus * &lambda;
            sigma = T::zero();
            for k in 0..m {
                let Some(set) = sets[k] else { continue };
                let next = prox(lambda[k] - r[k] * (gdot[k] + bias[k]), set);
                let d = next - lambda[k];
                if d != T::zero() {
                    lambda[k] = next;
                    gdot.axpy(d, &delassus.column(k), T::one());
                }
                sigma = sigma.max(d.abs());
            }
            if sigma < cfg.tol {
                converged = true;
                break;
            }
            if iterations == cfg.j_max {
                for rk in r.iter_mut() {
                    *rk *= T::lit(0.5);
                }
            }
        }
        let gdot = &gdot_free + &delassus * &lambda;

        let modes = (0..m)
            .map(|k| match sets[k] {
                None => Ok(ConstraintMode::Open),
                Some(set) => {
                    let g = gdot[k] + bias[k];
                    let res = prox_residual(lambda[k], g, r[k], set)?;
                    Ok(match (res.branch, set) {
                        (Branch::Interior, _) => ConstraintMode::Stick,
                        (Branch::Boundary, ConvexSet::NonNegHalfLine) => ConstraintMode::Open,
                        (Branch::Boundary, _) => {
                            if lambda[k] - r[k] * g > T::zero() {
                                ConstraintMode::SlipNeg
                            } else {
                                ConstraintMode::SlipPos
                            }
                        }
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let v_next = v_free + &minv_w * &lambda;
        Ok(MidpointSolve {
            report: ImpulseSolveReport {
                impulses: lambda,
                iterations,
                residual_norm: sigma,
                converged,
                modes,
                gdot,
                sets: sets.clone(),
            },
            v_next,
        })
    };

    let mut out = solve(&state.v)?;
    if cfg.force_velocity == ForceVelocity::Midpoint {
        let scale = T::one() + state.v.amax();
        let mut settled = false;
        for _ in 0..MIDPOINT_PASSES {
            let v_eval = (&state.v + &out.v_next) * T::lit(0.5);
            let next = solve(&v_eval)?;
            let change = (&next.v_next - &out.v_next).amax();
            out = next;
            if change <= cfg.tol.max(cfg.stick_tol) * scale {
                settled = true;
                break;
            }
        }
        out.report.converged &= settled;
    }
    Ok(out)
}

/// Solves the per-step impulses for the step starting at `state` under the
/// additional generalized input `u`.
pub fn solve_impulses<M, T>(
    model: &M,
    state: &State<T>,
    cfg: &StepperConfig<T>,
    u: &DVector<T>,
) -> Result<ImpulseSolveReport<T>>
where
    T: Real,
    M: MechanicalModel<T> + ?Sized,
{
    cfg.validate()?;
    Ok(solve_midpoint(model, state, cfg, u)?.report)
}

/// Advances `state` by one step. A non-converged impulse solve is still
/// applied; the report carries the flag.
pub fn step<M, T>(
    model: &M,
    state: &State<T>,
    cfg: &StepperConfig<T>,
    controller_force: &DVector<T>,
) -> Result<(State<T>, ImpulseSolveReport<T>)>
where
    T: Real,
    M: MechanicalModel<T> + ?Sized,
{
    let MidpointSolve { report, v_next } = solve_midpoint(model, state, cfg, controller_force)?;
    let q_next = &state.q + (&state.v + &v_next) * (cfg.dt * T::lit(0.5));
    Ok((
        State {
            q: q_next,
            v: v_next,
            t: state.t + cfg.dt,
        },
        report,
    ))
}

/// Instantaneous jump `v += M(q)^-1 * impulse`; positions and clock are kept.
pub fn apply_velocity_jump<M, T>(
    model: &M,
    state: &State<T>,
    generalized_impulse: &DVector<T>,
) -> Result<State<T>>
where
    T: Real,
    M: MechanicalModel<T> + ?Sized,
{
    let chol = factor(model.mass_matrix(&state.q))?;
    Ok(State {
        q: state.q.clone(),
        v: &state.v + chol.solve(generalized_impulse),
        t: state.t,
    })
}

#[cfg(test)]
mod tests;
