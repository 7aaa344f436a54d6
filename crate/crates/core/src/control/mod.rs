//! Feedback laws with impulsive corrections for the oscillator and the
//! Furuta pendulum.

mod furuta;
mod oscillator;

pub use furuta::{
    furuta_feedback, furuta_impulse_active, furuta_impulse_torque, shoot_furuta, wrapped_error,
    FurutaControlParams, FurutaController, FurutaShot,
};
pub use oscillator::{
    approx_impulse, osc_feedback, osc_impulse_active, robust_bvp_estimate, shoot_oscillator,
    BvpEstimate, Estimator, OscControlParams, OscillatorController,
};

use std::fmt;
use std::io::{self, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stepper::integrate::fmt_num;

/// Which controller produced an impulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ImpulseOsc,
    ImpulseFuruta,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::ImpulseOsc => "impulse_osc",
            EventKind::ImpulseFuruta => "impulse_furuta",
        })
    }
}

/// An instantaneous velocity jump applied by a controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlEvent<T: Real> {
    pub t: T,
    pub kind: EventKind,
    /// Configuration at which the jump happened.
    pub q: DVector<T>,
    pub pre_v: DVector<T>,
    pub post_v: DVector<T>,
    /// Scalar actuator impulse (force or torque times time).
    pub impulse: T,
    /// Generalized impulse `M(q) (post_v - pre_v)` applied to the system.
    pub generalized_impulse: DVector<T>,
    pub estimator_iters: usize,
    /// False when the estimator returned its best non-converged guess.
    pub converged: bool,
}

/// Writes `t,kind,impulse,pre_v_..,post_v_..,estimator_iters`.
pub fn write_events_csv<T: Real, W: Write>(events: &[ControlEvent<T>], dof: usize, mut out: W) -> io::Result<()> {
    let mut header = vec!["t".to_string(), "kind".into(), "impulse".into()];
    header.extend((0..dof).map(|i| format!("pre_v_{i}")));
    header.extend((0..dof).map(|i| format!("post_v_{i}")));
    header.push("estimator_iters".into());
    writeln!(out, "{}", header.join(","))?;
    for e in events {
        let mut cells = vec![fmt_num(e.t), e.kind.to_string(), fmt_num(e.impulse)];
        cells.extend(e.pre_v.iter().map(|&x| fmt_num(x)));
        cells.extend(e.post_v.iter().map(|&x| fmt_num(x)));
        cells.push(e.estimator_iters.to_string());
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Settings of a shooting estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootParams<T> {
    /// Simulated horizon of every probe.
    pub horizon: T,
    /// Finite-difference increment of the slope estimate.
    pub ds: T,
    /// Accepted terminal miss distance.
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Real> ShootParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > T::zero()) {
            return Err(Error::param("shoot.horizon", "must be > 0"));
        }
        if !(self.ds > T::zero()) {
            return Err(Error::param("shoot.ds", "must be > 0"));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::param("shoot.tol", "must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("shoot.max_iters", "must be >= 1"));
        }
        Ok(())
    }
}

/// Result of a scalar shooting search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootOutcome<T> {
    pub s: T,
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton iteration on `f(s) = 0` with a forward-difference slope and step
/// halving whenever a full step does not reduce `|f|`. Returns the best
/// point seen if the tolerance is not met. Non-finite values of `f` count as
/// rejected trials.
pub(crate) fn newton_fd<T, F>(mut f: F, s0: T, p: &ShootParams<T>) -> Result<ShootOutcome<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let mut s = s0;
    let mut fs = f(s)?;
    if !fs.is_finite() {
        return Ok(ShootOutcome {
            s,
            residual: fs,
            iterations: 0,
            converged: false,
        });
    }
    let mut iterations = 0;
    while fs.abs() > p.tol && iterations < p.max_iters {
        iterations += 1;
        let slope = (f(s + p.ds)? - fs) / p.ds;
        if slope == T::zero() || !slope.is_finite() {
            break;
        }
        let full = -fs / slope;
        let mut lam = T::one();
        let mut accepted = None;
        for _ in 0..12 {
            let trial = s + lam * full;
            let ft = f(trial)?;
            if ft.abs() < fs.abs() {
                accepted = Some((trial, ft));
                break;
            }
            lam *= T::lit(0.5);
        }
        let Some((trial, ft)) = accepted else { break };
        s = trial;
        fs = ft;
    }
    Ok(ShootOutcome {
        s,
        residual: fs,
        iterations,
        converged: fs.abs() <= p.tol,
    })
}

/// Samples `f` at `n >= 2` evenly spaced points of `[lo, hi]` and refines
/// sign changes by false position (Illinois variant), trying the brackets
/// with the smallest end values first. Returns the best point seen.
pub(crate) fn scan_bracket<T, F>(mut f: F, lo: T, hi: T, n: usize, p: &ShootParams<T>) -> Result<ShootOutcome<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let n = n.max(2);
    let step = (hi - lo) / T::lit((n - 1) as f64);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let s = lo + step * T::lit(i as f64);
        samples.push((s, f(s)?));
    }
    let mut best = ShootOutcome {
        s: lo,
        residual: T::lit(f64::INFINITY),
        iterations: 0,
        converged: false,
    };
    let consider = |s: T, fs: T, iterations: usize, best: &mut ShootOutcome<T>| {
        if fs.abs() < best.residual.abs() {
            *best = ShootOutcome {
                s,
                residual: fs,
                iterations,
                converged: fs.abs() <= p.tol,
            };
        }
    };
    for &(s, fs) in &samples {
        consider(s, fs, 0, &mut best);
    }
    if best.converged {
        return Ok(best);
    }
    let mut brackets: Vec<_> = samples
        .windows(2)
        .filter(|w| w[0].1.is_finite() && w[1].1.is_finite() && w[0].1 * w[1].1 < T::zero())
        .map(|w| (w[0], w[1]))
        .collect();
    brackets.sort_by(|a, b| {
        let ka = a.0 .1.abs().max(a.1 .1.abs());
        let kb = b.0 .1.abs().max(b.1 .1.abs());
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut iterations = 0;
    for ((mut a, mut fa), (mut b, mut fb)) in brackets.into_iter().take(4) {
        let mut side = 0i8;
        for _ in 0..p.max_iters {
            iterations += 1;
            let c = (a * fb - b * fa) / (fb - fa);
            let fc = f(c)?;
            consider(c, fc, iterations, &mut best);
            if best.converged {
                return Ok(best);
            }
            if !fc.is_finite() {
                break;
            }
            if fc * fb < T::zero() {
                a = b;
                fa = fb;
                if side == 1 {
                    fa *= T::lit(0.5);
                }
                side = 1;
            } else if side == -1 {
                fa *= T::lit(0.5);
            } else {
                side = -1;
            }
            b = c;
            fb = fc;
        }
    }
    best.iterations = iterations;
    Ok(best)
}
