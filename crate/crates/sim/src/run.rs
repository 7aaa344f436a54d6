//! Single runs: simulation, summary and output files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use stickslip_core::control::{wrapped_error, write_events_csv};
use stickslip_core::oscillator::stick_band;
use stickslip_core::{
    integrate, Furuta, FurutaController, MechanicalModel, NoControl, Oscillator, OscillatorController,
    State, Trajectory,
};

use crate::error::{Result, SimError};
use crate::scenario::{ControlSetup, Goal, Plant, Scenario};

/// Condensed outcome of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_state: State,
    /// Start of the final segment in which every rate is within the stick
    /// tolerance; `None` if the run ends moving.
    pub rest_since: Option<f64>,
    pub events: usize,
    pub non_converged: usize,
    pub max_iterations: usize,
    pub goal_met: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub summary: RunSummary,
}

/// Runs the scenario from its own initial state.
pub fn simulate(sc: &Scenario) -> Result<RunOutput> {
    simulate_from(sc, sc.initial.clone())
}

/// Runs the scenario from `initial` instead of its own initial state.
pub fn simulate_from(sc: &Scenario, initial: State) -> Result<RunOutput> {
    let cfg = &sc.stepper;
    let trajectory = match (&sc.plant, &sc.control) {
        (Plant::Oscillator(p), ControlSetup::None) => integrate(&Oscillator::new(*p)?, initial, sc.t_end, cfg, &mut NoControl)?,
        (Plant::Oscillator(p), ControlSetup::Oscillator(c)) => {
            let mut ctrl = OscillatorController::new(*c)?;
            integrate(&Oscillator::new(*p)?, initial, sc.t_end, cfg, &mut ctrl)?
        }
        (Plant::Furuta(p), ControlSetup::None) => integrate(&Furuta::new(*p)?, initial, sc.t_end, cfg, &mut NoControl)?,
        (Plant::Furuta(p), ControlSetup::Furuta(c)) => {
            let mut ctrl = FurutaController::new(*c)?;
            integrate(&Furuta::new(*p)?, initial, sc.t_end, cfg, &mut ctrl)?
        }
        _ => return Err(SimError::invalid("controller does not match the model")),
    };
    let summary = summarize(sc, &trajectory);
    Ok(RunOutput { trajectory, summary })
}

/// Builds the plant as a trait object, e.g. for energy or mass-matrix checks.
pub fn model(plant: &Plant) -> Result<Box<dyn MechanicalModel<f64> + Send + Sync>> {
    Ok(match plant {
        Plant::Oscillator(p) => Box::new(Oscillator::new(*p)?),
        Plant::Furuta(p) => Box::new(Furuta::new(*p)?),
    })
}

pub fn rest_since(traj: &Trajectory, stick_tol: f64) -> Option<f64> {
    let at_rest = |s: &State| s.v.amax() <= stick_tol;
    if !at_rest(traj.last()) {
        return None;
    }
    let k = traj.states.iter().rposition(|s| !at_rest(s)).map_or(0, |k| k + 1);
    Some(traj.states[k].t)
}

fn summarize(sc: &Scenario, traj: &Trajectory) -> RunSummary {
    let last = traj.last().clone();
    let rest = rest_since(traj, sc.stepper.stick_tol);
    let goal_met = sc.goal.map(|g| match g {
        Goal::Rest => match (rest, &sc.plant) {
            (None, _) => false,
            (Some(t), Plant::Oscillator(p)) => {
                let arrival = traj.states.iter().find(|s| s.t == t).unwrap_or(&last);
                stick_band(arrival.q[0], arrival.t, p)
            }
            (Some(_), Plant::Furuta(_)) => true,
        },
        Goal::Target {
            index,
            value,
            wrap,
            pos_tol,
            rate_tol,
        } => {
            let err = if wrap {
                wrapped_error(last.q[index], value)
            } else {
                last.q[index] - value
            };
            err.abs() <= pos_tol && last.v[index].abs() <= rate_tol
        }
    });
    RunSummary {
        steps: traj.reports.len(),
        final_state: last,
        rest_since: rest,
        events: traj.events.len(),
        non_converged: traj.non_converged,
        max_iterations: traj.max_iterations,
        goal_met,
    }
}

pub(crate) fn num(x: f64) -> String {
    format!("{x:.15e}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ")
}

fn model_name(plant: &Plant) -> &'static str {
    match plant {
        Plant::Oscillator(_) => "oscillator",
        Plant::Furuta(_) => "furuta",
    }
}

fn controller_name(c: &ControlSetup) -> &'static str {
    match c {
        ControlSetup::None => "none",
        ControlSetup::Oscillator(p) if !p.impulses => "feedback",
        ControlSetup::Furuta(p) if !p.impulses => "feedback",
        _ => "feedback_impulse",
    }
}

/// `key = value` lines; contains nothing that varies between identical runs.
pub fn summary_text(sc: &Scenario, s: &RunSummary) -> String {
    let mut out = String::new();
    let f = &s.final_state;
    let _ = writeln!(out, "name = {}", sc.name);
    let _ = writeln!(out, "model = {}", model_name(&sc.plant));
    let _ = writeln!(out, "controller = {}", controller_name(&sc.control));
    let _ = writeln!(out, "dt = {}", num(sc.stepper.dt));
    let _ = writeln!(out, "steps = {}", s.steps);
    let _ = writeln!(out, "final_t = {}", num(f.t));
    let _ = writeln!(out, "final_q = {}", join(f.q.as_slice()));
    let _ = writeln!(out, "final_v = {}", join(f.v.as_slice()));
    let _ = writeln!(out, "rest_since = {}", s.rest_since.map_or("none".into(), num));
    let _ = writeln!(out, "events = {}", s.events);
    let _ = writeln!(out, "non_converged = {}", s.non_converged);
    let _ = writeln!(out, "max_iterations = {}", s.max_iterations);
    let _ = writeln!(
        out,
        "goal_met = {}",
        s.goal_met.map_or("n/a", |g| if g { "true" } else { "false" })
    );
    out
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| SimError::Write {
            path: path.to_owned(),
            source,
        })
}

pub(crate) fn write_err(path: &Path) -> impl Fn(std::io::Error) -> SimError + '_ {
    move |source| SimError::Write {
        path: path.to_owned(),
        source,
    }
}

pub(crate) fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(write_err(dir))
}

/// Writes `trajectory.csv`, `events.csv` and `summary.txt` into `dir`.
pub fn write_run(dir: &Path, sc: &Scenario, out: &RunOutput) -> Result<()> {
    make_dir(dir)?;
    let path = dir.join("trajectory.csv");
    let mut w = create(&path)?;
    out.trajectory.write_csv(&mut w).and_then(|_| w.flush()).map_err(write_err(&path))?;

    let path = dir.join("events.csv");
    let mut w = create(&path)?;
    write_events_csv(&out.trajectory.events, sc.dof(), &mut w)
        .and_then(|_| w.flush())
        .map_err(write_err(&path))?;

    let path = dir.join("summary.txt");
    fs::write(&path, summary_text(sc, &out.summary)).map_err(write_err(&path))?;
    Ok(())
}

/// Runs the scenario and writes its files to `out_dir/<name>`.
pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<(PathBuf, RunOutput)> {
    let out = simulate(sc)?;
    let dir = out_dir.join(&sc.name);
    write_run(&dir, sc, &out)?;
    Ok((dir, out))
}
