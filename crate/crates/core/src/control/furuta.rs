use nalgebra::DVector;

use super::{newton_fd, scan_bracket, ControlEvent, EventKind, ShootOutcome, ShootParams};
use crate::error::{Error, Result};
use crate::furuta::{mass_matrix, Furuta, FurutaParams};
use crate::scalar::{sign, Real};
use crate::stepper::{
    advance, apply_velocity_jump, midpoint_config, ConstraintMode, Controller, ImpulseSolveReport,
    State, StepperConfig,
};

/// Gains and impulse settings of the pendulum controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FurutaControlParams<T> {
    pub k1: T,
    pub k2_pre: T,
    pub k2_post: T,
    pub k3: T,
    pub k4_pre: T,
    pub k4_post: T,
    pub theta_ref: T,
    /// Pendulum angle of the inverted position.
    pub theta_up: T,
    pub impulses: bool,
    /// Angular distance from `theta_up` that counts as on target.
    pub tol_q: T,
    /// Impulses are refused where `|cos theta2|` is below this value.
    pub cos_min: T,
    pub refractory_steps: usize,
    /// Largest change of either joint rate a single impulse may apply.
    pub max_rate_jump: T,
    /// Samples of the fallback scan when Newton iteration fails; 0 disables it.
    pub scan_points: usize,
    pub shoot: ShootParams<T>,
}

impl<T: Real> FurutaControlParams<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        for (name, k) in [
            ("k1", self.k1),
            ("k2_pre", self.k2_pre),
            ("k2_post", self.k2_post),
            ("k3", self.k3),
            ("k4_pre", self.k4_pre),
            ("k4_post", self.k4_post),
        ] {
            if !(k >= z) {
                return Err(Error::param(name, "gains must be >= 0"));
            }
        }
        if !(self.tol_q >= z) {
            return Err(Error::param("tol_q", "must be >= 0"));
        }
        if !(self.cos_min > z && self.cos_min < T::one()) {
            return Err(Error::param("cos_min", "must lie in (0, 1)"));
        }
        if !(self.max_rate_jump > z) {
            return Err(Error::param("max_rate_jump", "must be > 0"));
        }
        self.shoot.validate()
    }
}

/// `theta2 - theta_up` shifted into `[-pi, pi)`.
pub fn wrapped_error<T: Real>(theta2: T, theta_up: T) -> T {
    let two_pi = T::two_pi();
    let e = theta2 - theta_up;
    e - two_pi * ((e + T::pi()) / two_pi).floor()
}

/// `-(k1 (theta1 - theta_ref) + k2 dtheta1 + k3 e + k4 dtheta2)` with the
/// wrapped pendulum error `e`. `k2` and `k4` switch at the first stick of
/// the arm and the pendulum respectively.
pub fn furuta_feedback<T: Real>(
    q: &DVector<T>,
    v: &DVector<T>,
    t: T,
    p: &FurutaControlParams<T>,
    first_sticks: [Option<T>; 2],
) -> T {
    let switched = |t1: Option<T>| matches!(t1, Some(t1) if t >= t1);
    let k2 = if switched(first_sticks[0]) { p.k2_post } else { p.k2_pre };
    let k4 = if switched(first_sticks[1]) { p.k4_post } else { p.k4_pre };
    let e = wrapped_error(q[1], p.theta_up);
    -(p.k1 * (q[0] - p.theta_ref) + k2 * v[0] + p.k3 * e + k4 * v[1])
}

/// Arm torque impulse that changes the pendulum rate by `dv2` while the
/// pendulum joint itself stays unloaded. Returns `(U, dv1)`.
pub fn furuta_impulse_torque<T: Real>(
    theta2: T,
    dv2: T,
    plant: &FurutaParams<T>,
    cos_min: T,
) -> Result<(T, T)> {
    let c = theta2.cos();
    if c.abs() < cos_min {
        return Err(Error::SingularConfiguration { cos_theta2: c.abs().to_f64() });
    }
    let dv1 = -plant.pendulum_inertia() / (plant.m2 * plant.l1 * plant.c2 * c) * dv2;
    let m = mass_matrix(theta2, plant);
    Ok((m[(0, 0)] * dv1 + m[(0, 1)] * dv2, dv1))
}

/// Whether an impulse may fire: a joint sticks, the pendulum is off target,
/// the configuration is not singular and the refractory time has passed.
pub fn furuta_impulse_active<T: Real>(
    q: &DVector<T>,
    v: &DVector<T>,
    p: &FurutaControlParams<T>,
    stick_tol: T,
    steps_since_impulse: usize,
) -> bool {
    let stuck = v[0].abs() <= stick_tol || v[1].abs() <= stick_tol;
    stuck
        && wrapped_error(q[1], p.theta_up).abs() > p.tol_q
        && q[1].cos().abs() >= p.cos_min
        && steps_since_impulse > p.refractory_steps
}

/// Outcome of [`shoot_furuta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FurutaShot<T> {
    /// Pendulum rate right after the impulse.
    pub v2_plus: T,
    /// Unwrapped target angle the probes aim at.
    pub target: T,
    /// `theta2(t + T_shoot) - target` at `v2_plus`.
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
    /// The current rate already meets the tolerance; no impulse is needed.
    pub unchanged: bool,
}

/// Searches the post-impulse pendulum rate for which the closed loop
/// (feedback only) reaches the inverted angle after the shooting horizon.
/// The arm rate follows from the impulse coupling; both rate jumps are
/// limited to `max_rate_jump`.
///
/// Newton iteration starts from `-sign(e) sqrt(10 |e|)`; when it fails, the
/// admissible range is scanned for brackets. Non-convergence returns the
/// best rate found with `converged = false`, which is the current rate
/// (`unchanged`) if no kick improves on doing nothing.
pub fn shoot_furuta<T: Real>(
    model: &Furuta<T>,
    state: &State<T>,
    cfg: &StepperConfig<T>,
    probe: &FurutaController<T>,
) -> Result<FurutaShot<T>> {
    let mut base = probe.clone();
    base.params.impulses = false;
    base.shots.clear();
    let p = base.params;
    p.shoot.validate()?;
    let theta2 = state.q[1];
    let e = wrapped_error(theta2, p.theta_up);
    let target = theta2 - e;
    // arm rate change per unit pendulum rate change
    let (_, coupling) = furuta_impulse_torque(theta2, T::one(), &model.params, p.cos_min)?;
    let t_end = state.t + p.shoot.horizon;
    let v2_minus = state.v[1];
    let width = p.max_rate_jump / coupling.abs().max(T::one());
    let (lo, hi) = (v2_minus - width, v2_minus + width);
    let clamp = |s: T| s.max(lo).min(hi);
    let mut f = |s: T| -> Result<T> {
        let s = clamp(s);
        let mut c = base.clone();
        let mut st = state.clone();
        st.v[0] += coupling * (s - v2_minus);
        st.v[1] = s;
        match advance(model, st, t_end, cfg, &mut c) {
            Ok(end) => Ok(end.q[1] - target),
            Err(Error::NonFinite { .. }) => Ok(T::lit(f64::NAN)),
            Err(e) => Err(e),
        }
    };

    let current = f(v2_minus)?;
    let mut best = FurutaShot {
        v2_plus: v2_minus,
        target,
        residual: current,
        iterations: 0,
        converged: current.abs() <= p.shoot.tol,
        unchanged: true,
    };
    if best.converged {
        return Ok(best);
    }
    let mut iterations = 0;
    let mut take = |out: ShootOutcome<T>, best: &mut FurutaShot<T>| {
        iterations += out.iterations;
        if out.residual.abs() < best.residual.abs() || !best.residual.is_finite() {
            *best = FurutaShot {
                v2_plus: clamp(out.s),
                target,
                residual: out.residual,
                iterations,
                converged: out.converged,
                unchanged: false,
            };
        }
        best.iterations = iterations;
    };
    let s0 = clamp(-sign(e) * (T::lit(10.0) * e.abs()).sqrt());
    take(newton_fd(&mut f, s0, &p.shoot)?, &mut best);
    if !best.converged && p.scan_points >= 2 {
        take(scan_bracket(&mut f, lo, hi, p.scan_points, &p.shoot)?, &mut best);
    }
    Ok(best)
}

/// Linear state feedback on the arm torque plus shooting-based impulses
/// whenever a joint sticks off the inverted position.
#[derive(Debug, Clone, PartialEq)]
pub struct FurutaController<T: Real> {
    pub params: FurutaControlParams<T>,
    first_sticks: [Option<T>; 2],
    steps_since_impulse: usize,
    shots: Vec<FurutaShot<T>>,
}

impl<T: Real> FurutaController<T> {
    pub fn new(params: FurutaControlParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            first_sticks: [None, None],
            steps_since_impulse: usize::MAX,
            shots: Vec::new(),
        })
    }

    /// First stick times of arm and pendulum.
    pub fn first_sticks(&self) -> [Option<T>; 2] {
        self.first_sticks
    }

    /// Every shooting search run so far, including the ones that needed no
    /// impulse.
    pub fn shots(&self) -> &[FurutaShot<T>] {
        &self.shots
    }
}

impl<T: Real> Controller<T, Furuta<T>> for FurutaController<T> {
    fn force(&mut self, _model: &Furuta<T>, state: &State<T>, cfg: &StepperConfig<T>) -> DVector<T> {
        let q_mid = midpoint_config(state, cfg.dt);
        let u = furuta_feedback(&q_mid, &state.v, state.t, &self.params, self.first_sticks);
        DVector::from_column_slice(&[u, T::zero()])
    }

    fn after_step(
        &mut self,
        model: &Furuta<T>,
        state: &mut State<T>,
        report: &ImpulseSolveReport<T>,
        cfg: &StepperConfig<T>,
    ) -> Result<Option<ControlEvent<T>>> {
        self.steps_since_impulse = self.steps_since_impulse.saturating_add(1);
        for k in 0..2 {
            let stuck = report.modes.get(k) == Some(&ConstraintMode::Stick) && state.v[k].abs() <= cfg.stick_tol;
            if stuck && self.first_sticks[k].is_none() {
                self.first_sticks[k] = Some(state.t);
            }
        }
        if !self.params.impulses
            || !furuta_impulse_active(&state.q, &state.v, &self.params, cfg.stick_tol, self.steps_since_impulse)
        {
            return Ok(None);
        }
        let shot = shoot_furuta(model, state, cfg, self)?;
        self.shots.push(shot);
        let dv2 = shot.v2_plus - state.v[1];
        if shot.unchanged || dv2 == T::zero() {
            // wait for the next stick before searching again
            self.steps_since_impulse = 0;
            return Ok(None);
        }
        let (impulse, _) = furuta_impulse_torque(state.q[1], dv2, &model.params, self.params.cos_min)?;
        let generalized = DVector::from_column_slice(&[impulse, T::zero()]);
        let jumped = apply_velocity_jump(model, state, &generalized)?;
        let event = ControlEvent {
            t: state.t,
            kind: EventKind::ImpulseFuruta,
            q: state.q.clone(),
            pre_v: state.v.clone(),
            post_v: jumped.v.clone(),
            impulse,
            generalized_impulse: generalized,
            estimator_iters: shot.iterations,
            converged: shot.converged,
        };
        *state = jumped;
        self.steps_since_impulse = 0;
        Ok(Some(event))
    }
}
