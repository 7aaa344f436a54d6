//! Scenario files: TOML with `[params]`, `[initial]`, `[run]` and optional
//! `[stepper]`, `[controller]`, `[goal]` and `[sweep]` tables.

use std::path::Path;

use serde::Deserialize;
use stickslip_core::control::Estimator;
use stickslip_core::{
    ForceVelocity, FurutaControlParams, FurutaParams, OscControlParams, OscillatorParams, ShootParams, State,
    StepperConfig,
};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Oscillator,
    Furuta,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    name: String,
    model: ModelKind,
    params: toml::Value,
    initial: InitialSpec,
    run: RunSpec,
    #[serde(default)]
    stepper: StepperSpec,
    #[serde(default)]
    controller: ControllerSpec,
    goal: Option<GoalSpec>,
    sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSpec {
    q: Vec<f64>,
    v: Vec<f64>,
    #[serde(default)]
    t: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSpec {
    dt: f64,
    t_end: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepperSpec {
    tol: Option<f64>,
    j_max: Option<usize>,
    gamma: Option<f64>,
    restitution: Option<f64>,
    stick_tol: Option<f64>,
    r_init: Option<Vec<f64>>,
    force_velocity: Option<ForceVelocitySpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ForceVelocitySpec {
    Start,
    Midpoint,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    None,
    Feedback,
    FeedbackImpulse,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EstimatorSpec {
    RobustBvp,
    Approx,
    Shooting,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSpec {
    #[serde(default)]
    kind: ControllerKind,
    estimator: Option<EstimatorSpec>,
    k1: Option<f64>,
    k2_pre: Option<f64>,
    k2_post: Option<f64>,
    k3: Option<f64>,
    k4_pre: Option<f64>,
    k4_post: Option<f64>,
    theta_ref: Option<f64>,
    theta_up: Option<f64>,
    lambda_t_max: Option<f64>,
    tol_q: Option<f64>,
    refractory_steps: Option<usize>,
    bvp_tol: Option<f64>,
    bvp_max_iters: Option<usize>,
    cos_min: Option<f64>,
    max_rate_jump: Option<f64>,
    scan_points: Option<usize>,
    shoot: Option<ShootSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShootSpec {
    horizon: f64,
    ds: f64,
    tol: f64,
    max_iters: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
enum GoalSpec {
    Rest,
    Target {
        index: usize,
        value: f64,
        #[serde(default)]
        wrap: bool,
        pos_tol: f64,
        rate_tol: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpec {
    #[serde(default = "default_stride")]
    stride: usize,
    axis: Vec<AxisSpec>,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisSpec {
    coordinate: String,
    from: f64,
    to: f64,
    points: usize,
    #[serde(default = "default_endpoint")]
    endpoint: bool,
}

fn default_endpoint() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OscParamsSpec {
    m: f64,
    g: f64,
    k1: f64,
    k2: f64,
    mu1: f64,
    mu2: f64,
    mu3: f64,
    omega: f64,
    v_half: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FurutaParamsSpec {
    l1: f64,
    c1: f64,
    l2: f64,
    c2: f64,
    r1: f64,
    r2: f64,
    m1: f64,
    m2: f64,
    j1: f64,
    j2: f64,
    g: f64,
    mu: f64,
    lambda_static1: f64,
    lambda_static2: f64,
    arm1: Option<f64>,
    arm2: Option<f64>,
}

/// Plant of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Oscillator(OscillatorParams),
    Furuta(FurutaParams),
}

impl Plant {
    pub fn dof(&self) -> usize {
        2
    }
}

/// Closed-loop setup; `impulses` inside the parameters tells feedback-only
/// and impulsive control apart.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSetup {
    None,
    Oscillator(OscControlParams),
    Furuta(FurutaControlParams),
}

/// Success condition evaluated on the final state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    /// All rates at or below the stick tolerance; for the oscillator the
    /// rest position must also lie in the stick band at arrival.
    Rest,
    /// Coordinate `index` within `pos_tol` of `value` (modulo 2 pi when
    /// `wrap`) and its rate within `rate_tol`.
    Target {
        index: usize,
        value: f64,
        wrap: bool,
        pos_tol: f64,
        rate_tol: f64,
    },
}

/// Which initial coordinate a sweep axis replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    Q(usize),
    V(usize),
}

impl Coordinate {
    fn parse(s: &str, dof: usize) -> Result<Self> {
        let (kind, idx) = s.split_at(1.min(s.len()));
        let i: usize = idx
            .parse()
            .map_err(|_| SimError::invalid(format!("sweep coordinate `{s}`: expected q<i> or v<i>")))?;
        if i >= dof {
            return Err(SimError::invalid(format!("sweep coordinate `{s}` exceeds {dof} degrees of freedom")));
        }
        match kind {
            "q" => Ok(Coordinate::Q(i)),
            "v" => Ok(Coordinate::V(i)),
            _ => Err(SimError::invalid(format!("sweep coordinate `{s}`: expected q<i> or v<i>"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Coordinate::Q(i) => format!("q{i}"),
            Coordinate::V(i) => format!("v{i}"),
        }
    }

    pub(crate) fn set(&self, state: &mut State, x: f64) {
        match *self {
            Coordinate::Q(i) => state.q[i] = x,
            Coordinate::V(i) => state.v[i] = x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub coordinate: Coordinate,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Every `stride`-th state of a cell goes to the combined phase file.
    pub stride: usize,
    pub axes: Vec<Axis>,
}

impl Sweep {
    /// Initial coordinates of every cell, first axis outermost.
    pub fn cells(&self) -> Vec<Vec<f64>> {
        let mut cells = vec![Vec::new()];
        for axis in &self.axes {
            cells = cells
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&x| {
                        let mut c = prefix.clone();
                        c.push(x);
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub plant: Plant,
    pub initial: State,
    pub t_end: f64,
    pub stepper: StepperConfig,
    pub control: ControlSetup,
    pub goal: Option<Goal>,
    pub sweep: Option<Sweep>,
}

/// Command-line replacements applied before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

impl Scenario {
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: Overrides) -> Result<Self> {
        let mut file: File = toml::from_str(text)?;
        if let Some(dt) = overrides.dt {
            file.run.dt = dt;
        }
        if let Some(t_end) = overrides.t_end {
            file.run.t_end = t_end;
        }
        build(file)
    }

    pub fn dof(&self) -> usize {
        self.plant.dof()
    }
}

fn build(f: File) -> Result<Scenario> {
    if f.name.is_empty() || f.name.contains(['/', '\\']) || f.name.starts_with('.') {
        return Err(SimError::invalid("name must be a plain, non-empty file name"));
    }
    let plant = match f.model {
        ModelKind::Oscillator => {
            let p: OscParamsSpec = f.params.try_into()?;
            let p = OscillatorParams {
                m: p.m,
                g: p.g,
                k1: p.k1,
                k2: p.k2,
                mu1: p.mu1,
                mu2: p.mu2,
                mu3: p.mu3,
                omega: p.omega,
                v_half: p.v_half,
            };
            p.validate()?;
            Plant::Oscillator(p)
        }
        ModelKind::Furuta => {
            let p: FurutaParamsSpec = f.params.try_into()?;
            let p = FurutaParams {
                l1: p.l1,
                c1: p.c1,
                l2: p.l2,
                c2: p.c2,
                r1: p.r1,
                r2: p.r2,
                m1: p.m1,
                m2: p.m2,
                j1: p.j1,
                j2: p.j2,
                g: p.g,
                mu: p.mu,
                lambda_static1: p.lambda_static1,
                lambda_static2: p.lambda_static2,
                arm1: p.arm1,
                arm2: p.arm2,
            };
            p.validate()?;
            Plant::Furuta(p)
        }
    };
    let dof = plant.dof();

    let i = &f.initial;
    if i.q.len() != dof || i.v.len() != dof {
        return Err(SimError::invalid(format!("initial q and v need {dof} entries each")));
    }
    if !i.t.is_finite() || i.q.iter().chain(&i.v).any(|x| !x.is_finite()) {
        return Err(SimError::invalid("initial state must be finite"));
    }
    let initial = State::from_slices(&i.q, &i.v, i.t);

    if !(f.run.dt > 0.0) || !f.run.dt.is_finite() {
        return Err(SimError::invalid("run.dt must be finite and > 0"));
    }
    if !(f.run.t_end > i.t) || !f.run.t_end.is_finite() {
        return Err(SimError::invalid("run.t_end must be finite and after initial.t"));
    }

    let defaults = StepperConfig::with_dt(f.run.dt);
    let s = f.stepper;
    let stepper = StepperConfig {
        dt: f.run.dt,
        r_init: s.r_init,
        tol: s.tol.unwrap_or(defaults.tol),
        j_max: s.j_max.unwrap_or(defaults.j_max),
        gamma: s.gamma.unwrap_or(defaults.gamma),
        restitution: s.restitution.unwrap_or(defaults.restitution),
        stick_tol: s.stick_tol.unwrap_or(defaults.stick_tol),
        force_velocity: match s.force_velocity {
            None | Some(ForceVelocitySpec::Start) => ForceVelocity::Start,
            Some(ForceVelocitySpec::Midpoint) => ForceVelocity::Midpoint,
        },
    };
    stepper.validate()?;

    let control = build_control(&plant, &f.controller)?;

    let goal = match f.goal {
        None => None,
        Some(GoalSpec::Rest) => Some(Goal::Rest),
        Some(GoalSpec::Target {
            index,
            value,
            wrap,
            pos_tol,
            rate_tol,
        }) => {
            if index >= dof {
                return Err(SimError::invalid("goal.index exceeds the degrees of freedom"));
            }
            if !(pos_tol >= 0.0 && rate_tol >= 0.0) || !value.is_finite() {
                return Err(SimError::invalid("goal tolerances must be >= 0 and value finite"));
            }
            Some(Goal::Target {
                index,
                value,
                wrap,
                pos_tol,
                rate_tol,
            })
        }
    };

    let sweep = match f.sweep {
        None => None,
        Some(sw) => {
            if sw.axis.is_empty() {
                return Err(SimError::invalid("sweep needs at least one axis"));
            }
            if sw.stride == 0 {
                return Err(SimError::invalid("sweep.stride must be >= 1"));
            }
            let mut axes = Vec::new();
            for a in sw.axis {
                let coordinate = Coordinate::parse(&a.coordinate, dof)?;
                if axes.iter().any(|x: &Axis| x.coordinate == coordinate) {
                    return Err(SimError::invalid(format!("sweep coordinate `{}` repeated", a.coordinate)));
                }
                if a.points == 0 {
                    return Err(SimError::invalid("sweep grids must be non-empty"));
                }
                if !a.from.is_finite() || !a.to.is_finite() {
                    return Err(SimError::invalid("sweep bounds must be finite"));
                }
                axes.push(Axis {
                    coordinate,
                    values: grid(a.from, a.to, a.points, a.endpoint),
                });
            }
            Some(Sweep { stride: sw.stride, axes })
        }
    };

    Ok(Scenario {
        name: f.name,
        plant,
        initial,
        t_end: f.run.t_end,
        stepper,
        control,
        goal,
        sweep,
    })
}

/// `points` evenly spaced values from `from` towards `to`; `to` itself is
/// included only with `endpoint`.
pub fn grid(from: f64, to: f64, points: usize, endpoint: bool) -> Vec<f64> {
    if points == 1 {
        return vec![from];
    }
    let div = if endpoint { points - 1 } else { points } as f64;
    (0..points)
        .map(|i| {
            if endpoint && i == points - 1 {
                to
            } else {
                from + (to - from) * i as f64 / div
            }
        })
        .collect()
}

fn need(x: Option<f64>, name: &str) -> Result<f64> {
    x.ok_or_else(|| SimError::invalid(format!("controller.{name} is required")))
}

fn build_control(plant: &Plant, c: &ControllerSpec) -> Result<ControlSetup> {
    if c.kind == ControllerKind::None {
        return Ok(ControlSetup::None);
    }
    let impulses = c.kind == ControllerKind::FeedbackImpulse;
    let shoot = |horizon, ds, tol, max_iters| match &c.shoot {
        Some(s) => ShootParams {
            horizon: s.horizon,
            ds: s.ds,
            tol: s.tol,
            max_iters: s.max_iters,
        },
        None => ShootParams {
            horizon,
            ds,
            tol,
            max_iters,
        },
    };
    match plant {
        Plant::Oscillator(_) => {
            let estimator = match c.estimator {
                Some(EstimatorSpec::RobustBvp) => Estimator::RobustBvp,
                Some(EstimatorSpec::Approx) => Estimator::Approx,
                Some(EstimatorSpec::Shooting) => Estimator::Shooting,
                None if impulses => return Err(SimError::invalid("controller.estimator is required")),
                None => Estimator::RobustBvp,
            };
            let p = OscControlParams {
                k1: need(c.k1, "k1")?,
                k2_pre: need(c.k2_pre, "k2_pre")?,
                k2_post: need(c.k2_post, "k2_post")?,
                lambda_t_max: c.lambda_t_max,
                estimator,
                impulses,
                tol_q: c.tol_q.unwrap_or(1e-3),
                refractory_steps: c.refractory_steps.unwrap_or(1),
                bvp_tol: c.bvp_tol.unwrap_or(1e-13),
                bvp_max_iters: c.bvp_max_iters.unwrap_or(50),
                shoot: shoot(6.0, 1e-4, 1e-4, 30),
            };
            p.validate()?;
            Ok(ControlSetup::Oscillator(p))
        }
        Plant::Furuta(_) => {
            if c.estimator.is_some() {
                return Err(SimError::invalid("the pendulum controller always shoots; drop controller.estimator"));
            }
            let p = FurutaControlParams {
                k1: need(c.k1, "k1")?,
                k2_pre: need(c.k2_pre, "k2_pre")?,
                k2_post: need(c.k2_post, "k2_post")?,
                k3: need(c.k3, "k3")?,
                k4_pre: need(c.k4_pre, "k4_pre")?,
                k4_post: need(c.k4_post, "k4_post")?,
                theta_ref: need(c.theta_ref, "theta_ref")?,
                theta_up: c.theta_up.unwrap_or(std::f64::consts::PI),
                impulses,
                tol_q: c.tol_q.unwrap_or(1e-3),
                cos_min: c.cos_min.unwrap_or(0.05),
                refractory_steps: c.refractory_steps.unwrap_or(1),
                max_rate_jump: c.max_rate_jump.unwrap_or(40.0),
                scan_points: c.scan_points.unwrap_or(41),
                shoot: shoot(3.0, 1e-4, 1e-3, 20),
            };
            p.validate()?;
            Ok(ControlSetup::Furuta(p))
        }
    }
}
