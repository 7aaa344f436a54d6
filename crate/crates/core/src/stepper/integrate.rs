use std::io::{self, Write};

use nalgebra::DVector;

use super::{step, ImpulseSolveReport, MechanicalModel, State, StepperConfig};
use crate::control::ControlEvent;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hooks a controller into the integration loop.
///
/// `force` is queried before every step and is held constant over it;
/// `after_step` sees the end-of-step state and may apply an instantaneous
/// velocity jump to it.
pub trait Controller<T: Real, M: ?Sized> {
    fn force(&mut self, model: &M, state: &State<T>, cfg: &StepperConfig<T>) -> DVector<T>;

    fn after_step(
        &mut self,
        _model: &M,
        _state: &mut State<T>,
        _report: &ImpulseSolveReport<T>,
        _cfg: &StepperConfig<T>,
    ) -> Result<Option<ControlEvent<T>>> {
        Ok(None)
    }
}

/// Free motion.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoControl;

impl<T: Real, M: MechanicalModel<T> + ?Sized> Controller<T, M> for NoControl {
    fn force(&mut self, model: &M, _state: &State<T>, _cfg: &StepperConfig<T>) -> DVector<T> {
        DVector::zeros(model.dof())
    }
}

/// Recorded run. `reports[k]` and `forces[k]` belong to the step from
/// `states[k]` to `states[k + 1]`.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub states: Vec<State<T>>,
    pub reports: Vec<ImpulseSolveReport<T>>,
    pub forces: Vec<DVector<T>>,
    pub events: Vec<ControlEvent<T>>,
    pub non_converged: usize,
    pub max_iterations: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &State<T> {
        self.states.last().expect("a trajectory always holds its initial state")
    }

    /// Writes `t,q_0..,v_0..,Lambda_0..,converged`, one row per state. The
    /// initial row carries zero impulses.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let first = &self.states[0];
        let n = first.dof();
        let m = self.reports.first().map_or(0, |r| r.impulses.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("q_{i}")));
        header.extend((0..n).map(|i| format!("v_{i}")));
        header.extend((0..m).map(|i| format!("Lambda_{i}")));
        header.push("converged".into());
        writeln!(out, "{}", header.join(","))?;
        for (k, s) in self.states.iter().enumerate() {
            let report = k.checked_sub(1).map(|i| &self.reports[i]);
            write_row(&mut out, s, report, m)?;
        }
        Ok(())
    }
}

pub(crate) fn fmt_num<T: Real>(x: T) -> String {
    format!("{:.15e}", x.to_f64())
}

fn write_row<T: Real, W: Write>(
    out: &mut W,
    s: &State<T>,
    report: Option<&ImpulseSolveReport<T>>,
    m: usize,
) -> io::Result<()> {
    let mut cells = Vec::with_capacity(2 + 2 * s.dof() + m);
    cells.push(fmt_num(s.t));
    cells.extend(s.q.iter().map(|&x| fmt_num(x)));
    cells.extend(s.v.iter().map(|&x| fmt_num(x)));
    match report {
        Some(r) => {
            cells.extend(r.impulses.iter().map(|&x| fmt_num(x)));
            cells.push(u8::from(r.converged).to_string());
        }
        None => {
            cells.extend((0..m).map(|_| fmt_num(T::zero())));
            cells.push("1".into());
        }
    }
    writeln!(out, "{}", cells.join(","))
}

fn step_count<T: Real>(t0: T, t_end: T, dt: T) -> Result<usize> {
    if !(t_end >= t0) {
        return Err(Error::param("t_end", "must not precede the initial time"));
    }
    let n = ((t_end - t0) / dt).round();
    Ok(n.to_f64() as usize)
}

fn run<T, M, C, F>(
    model: &M,
    state0: State<T>,
    t_end: T,
    cfg: &StepperConfig<T>,
    controller: &mut C,
    mut observe: F,
) -> Result<State<T>>
where
    T: Real,
    M: MechanicalModel<T> + ?Sized,
    C: Controller<T, M> + ?Sized,
    F: FnMut(&State<T>, DVector<T>, ImpulseSolveReport<T>, Option<ControlEvent<T>>),
{
    cfg.validate()?;
    let steps = step_count(state0.t, t_end, cfg.dt)?;
    let mut state = state0;
    for _ in 0..steps {
        let u = controller.force(model, &state, cfg);
        let (mut next, report) = step(model, &state, cfg, &u)?;
        let event = controller.after_step(model, &mut next, &report, cfg)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { t: next.t.to_f64() });
        }
        observe(&next, u, report, event);
        state = next;
    }
    Ok(state)
}

/// Integrates from `state0` to `t_end` with a fixed step, recording every
/// state, impulse report, controller force and control event.
pub fn integrate<T, M, C>(
    model: &M,
    state0: State<T>,
    t_end: T,
    cfg: &StepperConfig<T>,
    controller: &mut C,
) -> Result<Trajectory<T>>
where
    T: Real,
    M: MechanicalModel<T> + ?Sized,
    C: Controller<T, M> + ?Sized,
{
    let mut traj = Trajectory {
        states: vec![state0.clone()],
        reports: Vec::new(),
        forces: Vec::new(),
        events: Vec::new(),
        non_converged: 0,
        max_iterations: 0,
    };
    run(model, state0, t_end, cfg, controller, |s, u, report, event| {
        traj.states.push(s.clone());
        traj.non_converged += usize::from(!report.converged);
        traj.max_iterations = traj.max_iterations.max(report.iterations);
        traj.reports.push(report);
        traj.forces.push(u);
        traj.events.extend(event);
    })?;
    Ok(traj)
}

/// Same loop as [`integrate`] but only returns the final state.
pub fn advance<T, M, C>(
    model: &M,
    state0: State<T>,
    t_end: T,
    cfg: &StepperConfig<T>,
    controller: &mut C,
) -> Result<State<T>>
where
    T: Real,
    M: MechanicalModel<T> + ?Sized,
    C: Controller<T, M> + ?Sized,
{
    run(model, state0, t_end, cfg, controller, |_, _, _, _| {})
}
