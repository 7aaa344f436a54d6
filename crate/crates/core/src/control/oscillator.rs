use nalgebra::DVector;

use super::{newton_fd, ControlEvent, EventKind, ShootOutcome, ShootParams};
use crate::error::{Error, Result};
use crate::oscillator::{Oscillator, OscillatorParams};
use crate::scalar::{sign, Real};
use crate::stepper::{
    advance, apply_velocity_jump, midpoint_config, ConstraintMode, Controller, ImpulseSolveReport,
    State, StepperConfig,
};

/// How the size of a corrective impulse is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Closed-form boundary-value solution under the lowest friction.
    RobustBvp,
    /// Frictional stopping distance without spring and damper.
    Approx,
    /// Secant search on simulated probes of the closed loop.
    Shooting,
}

/// Gains and impulse settings of the oscillator controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscControlParams<T> {
    pub k1: T,
    /// Damping gain before the first stick.
    pub k2_pre: T,
    /// Damping gain from the first stick on.
    pub k2_post: T,
    /// Largest friction force the plant can exert; `None` uses `mu_upper m g`.
    pub lambda_t_max: Option<T>,
    pub estimator: Estimator,
    pub impulses: bool,
    /// Positions within this distance of the origin are accepted.
    pub tol_q: T,
    /// Steps after an impulse during which no new one may fire.
    pub refractory_steps: usize,
    pub bvp_tol: T,
    pub bvp_max_iters: usize,
    pub shoot: ShootParams<T>,
}

impl<T: Real> OscControlParams<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        if !(self.k1 > z) {
            return Err(Error::param("k1", "must be > 0"));
        }
        if !(self.k2_pre >= z && self.k2_post >= z) {
            return Err(Error::param("k2", "must be >= 0"));
        }
        if let Some(l) = self.lambda_t_max {
            if !(l > z) {
                return Err(Error::param("lambda_t_max", "must be > 0"));
            }
        }
        if !(self.tol_q >= z) {
            return Err(Error::param("tol_q", "must be >= 0"));
        }
        if !(self.bvp_tol > z) || self.bvp_max_iters == 0 {
            return Err(Error::param("bvp_tol", "tolerance and iteration cap must be positive"));
        }
        self.shoot.validate()
    }

    fn lambda_t_max(&self, plant: &OscillatorParams<T>) -> T {
        self.lambda_t_max.unwrap_or(plant.mu_upper() * plant.m * plant.g)
    }
}

/// `-k1 q_x - k2 v_x`, with `k2` switched at the first stick time.
pub fn osc_feedback<T: Real>(qx: T, vx: T, t: T, p: &OscControlParams<T>, first_stick: Option<T>) -> T {
    let k2 = match first_stick {
        Some(t1) if t >= t1 => p.k2_post,
        _ => p.k2_pre,
    };
    -p.k1 * qx - k2 * vx
}

/// Whether the mass rests away from the origin at a position where the
/// controller spring alone cannot break static friction.
pub fn osc_impulse_active<T: Real>(
    qx: T,
    vx: T,
    p: &OscControlParams<T>,
    plant: &OscillatorParams<T>,
    stick_tol: T,
) -> bool {
    vx.abs() <= stick_tol && qx.abs() <= p.lambda_t_max(plant) / p.k1 && qx.abs() > p.tol_q
}

/// Post-impulse velocity and travel time of the boundary-value estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpEstimate<T> {
    pub v_plus: T,
    pub duration: T,
    pub iterations: usize,
}

struct BvpCoefficients<T> {
    c: T,
    l1: T,
    l2: T,
}

fn bvp_coefficients<T: Real>(p: &OscControlParams<T>, plant: &OscillatorParams<T>) -> Result<BvpCoefficients<T>> {
    let m = plant.m;
    let omega = (p.k1 / m).sqrt();
    let theta = p.k2_post / (T::lit(2.0) * (m * p.k1).sqrt());
    if !(theta > T::one()) {
        return Err(Error::param("k2_post", "the robust estimate needs an overdamped loop"));
    }
    let root = omega * (theta * theta - T::one()).sqrt();
    Ok(BvpCoefficients {
        c: plant.g * plant.mu_lower() / (omega * omega),
        l1: -omega * theta + root,
        l2: -omega * theta - root,
    })
}

/// Velocity that carries the mass from rest-position `qx_star` to the
/// origin, arriving with zero velocity, under the post-switch feedback and
/// the lowest friction coefficient. Newton iteration on the travel time.
pub fn robust_bvp_estimate<T: Real>(
    qx_star: T,
    p: &OscControlParams<T>,
    plant: &OscillatorParams<T>,
) -> Result<BvpEstimate<T>> {
    if qx_star == T::zero() || !qx_star.is_finite() {
        return Err(Error::param("qx_star", "must be finite and non-zero"));
    }
    let BvpCoefficients { c, l1, l2 } = bvp_coefficients(p, plant)?;
    let s = -sign(qx_star);
    let a = l2 / (l2 - l1);
    let b = l1 / (l2 - l1);
    let k = l1 * l2 / (l2 - l1);
    let position = |d: T| s * c * (a * (-l1 * d).exp() - b * (-l2 * d).exp() - T::one());
    let velocity = |d: T| s * c * k * ((-l1 * d).exp() - (-l2 * d).exp());

    let mut d = (T::lit(2.0) * qx_star.abs() / (plant.g * plant.mu_lower())).sqrt();
    let scale = T::one() + qx_star.abs();
    for it in 1..=p.bvp_max_iters {
        let f = position(d) - qx_star;
        let df = -velocity(d);
        if f.abs() <= p.bvp_tol * scale {
            return Ok(BvpEstimate {
                v_plus: velocity(d),
                duration: d,
                iterations: it,
            });
        }
        let next = d - f / df;
        d = if next > T::zero() { next } else { d * T::lit(0.5) };
    }
    Err(Error::NoConvergence {
        estimator: "robust BVP",
        iterations: p.bvp_max_iters,
        residual: (position(d) - qx_star).abs().to_f64(),
    })
}

/// `-sign(q) sqrt(2 c omega^2 m^2 |q|)`: the impulse that a friction force
/// of `mu_lower m g` alone brings to rest exactly at the origin.
pub fn approx_impulse<T: Real>(qx: T, p: &OscControlParams<T>, plant: &OscillatorParams<T>) -> T {
    let m = plant.m;
    let omega2 = p.k1 / m;
    let c = plant.g * plant.mu_lower() / omega2;
    -sign(qx) * (T::lit(2.0) * c * omega2 * m * m * qx.abs()).sqrt()
}

/// Velocity `s` for which the closed loop, started from `state` with
/// `v_x = s`, is at the origin after the shooting horizon. Probes use a copy
/// of `probe` with impulses disabled. Fails when the tolerance is not met.
pub fn shoot_oscillator<T: Real>(
    model: &Oscillator<T>,
    state: &State<T>,
    cfg: &StepperConfig<T>,
    probe: &OscillatorController<T>,
    s0: T,
) -> Result<ShootOutcome<T>> {
    let mut base = probe.clone();
    base.params.impulses = false;
    let shoot = base.params.shoot;
    shoot.validate()?;
    let t_end = state.t + shoot.horizon;
    let out = newton_fd(
        |s| {
            let mut c = base.clone();
            let mut st = state.clone();
            st.v[0] = s;
            Ok(advance(model, st, t_end, cfg, &mut c)?.q[0])
        },
        s0,
        &shoot,
    )?;
    if !out.converged {
        return Err(Error::NoConvergence {
            estimator: "oscillator shooting",
            iterations: out.iterations,
            residual: out.residual.abs().to_f64(),
        });
    }
    Ok(out)
}

/// Spring-damper feedback that switches its damping at the first stick and
/// kicks the mass with a velocity impulse whenever it sticks off target.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorController<T: Real> {
    pub params: OscControlParams<T>,
    first_stick: Option<T>,
    steps_since_impulse: usize,
}

impl<T: Real> OscillatorController<T> {
    pub fn new(params: OscControlParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            first_stick: None,
            steps_since_impulse: usize::MAX,
        })
    }

    /// Time of the first recorded stick, if any.
    pub fn first_stick(&self) -> Option<T> {
        self.first_stick
    }

    fn estimate(
        &self,
        model: &Oscillator<T>,
        state: &State<T>,
        cfg: &StepperConfig<T>,
    ) -> Result<(T, usize, bool)> {
        let plant = &model.params;
        let qx = state.q[0];
        let vx = state.v[0];
        match self.params.estimator {
            Estimator::RobustBvp => {
                let est = robust_bvp_estimate(qx, &self.params, plant)?;
                Ok((plant.m * (est.v_plus - vx), est.iterations, true))
            }
            Estimator::Approx => Ok((approx_impulse(qx, &self.params, plant), 0, true)),
            Estimator::Shooting => {
                let guess = vx + approx_impulse(qx, &self.params, plant) / plant.m;
                let out = shoot_oscillator(model, state, cfg, self, guess)?;
                Ok((plant.m * (out.s - vx), out.iterations, true))
            }
        }
    }
}

impl<T: Real> Controller<T, Oscillator<T>> for OscillatorController<T> {
    fn force(&mut self, _model: &Oscillator<T>, state: &State<T>, cfg: &StepperConfig<T>) -> DVector<T> {
        let q_mid = midpoint_config(state, cfg.dt);
        let u = osc_feedback(q_mid[0], state.v[0], state.t, &self.params, self.first_stick);
        DVector::from_column_slice(&[u, T::zero()])
    }

    fn after_step(
        &mut self,
        model: &Oscillator<T>,
        state: &mut State<T>,
        report: &ImpulseSolveReport<T>,
        cfg: &StepperConfig<T>,
    ) -> Result<Option<ControlEvent<T>>> {
        self.steps_since_impulse = self.steps_since_impulse.saturating_add(1);
        let stuck = report.modes.get(1) == Some(&ConstraintMode::Stick) && state.v[0].abs() <= cfg.stick_tol;
        if !stuck {
            return Ok(None);
        }
        if self.first_stick.is_none() {
            self.first_stick = Some(state.t);
        }
        if !self.params.impulses
            || self.steps_since_impulse <= self.params.refractory_steps
            || !osc_impulse_active(state.q[0], state.v[0], &self.params, &model.params, cfg.stick_tol)
        {
            return Ok(None);
        }
        let (impulse, iters, converged) = self.estimate(model, state, cfg)?;
        let generalized = DVector::from_column_slice(&[impulse, T::zero()]);
        let jumped = apply_velocity_jump(model, state, &generalized)?;
        let event = ControlEvent {
            t: state.t,
            kind: EventKind::ImpulseOsc,
            q: state.q.clone(),
            pre_v: state.v.clone(),
            post_v: jumped.v.clone(),
            impulse,
            generalized_impulse: generalized,
            estimator_iters: iters,
            converged,
        };
        *state = jumped;
        self.steps_since_impulse = 0;
        Ok(Some(event))
    }
}
