//! Acceptance checks over the bundled scenarios, with independent oracles.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use stickslip_core::control::{approx_impulse, robust_bvp_estimate, wrapped_error};
use stickslip_core::furuta::{equivalent_arm, h_vector, mass_matrix};
use stickslip_core::setvalued::ConvexSet;
use stickslip_core::{
    advance, integrate, solve_impulses, ForceVelocity, MechanicalModel, NoControl, OscControlParams, Oscillator,
    OscillatorParams,
    ReducedOscillator, State, StepperConfig, Trajectory,
};

use crate::error::{Result, SimError};
use crate::run::{model, simulate, RunOutput};
use crate::scenario::{ControlSetup, Overrides, Plant, Scenario};
use crate::sweep::{run_sweep, sweep_cells, SweepReport};

/// Scenario files compiled into the binary.
pub const BUILTIN: &[(&str, &str)] = &[
    ("osc-free", include_str!("../../../scenarios/osc-free.toml")),
    ("osc-sweep", include_str!("../../../scenarios/osc-sweep.toml")),
    ("osc-ctrl-bvp", include_str!("../../../scenarios/osc-ctrl-bvp.toml")),
    ("osc-ctrl-shoot", include_str!("../../../scenarios/osc-ctrl-shoot.toml")),
    ("osc-ctrl-approx", include_str!("../../../scenarios/osc-ctrl-approx.toml")),
    ("furuta-free", include_str!("../../../scenarios/furuta-free.toml")),
    ("furuta-free-sweep", include_str!("../../../scenarios/furuta-free-sweep.toml")),
    ("furuta-ctrl", include_str!("../../../scenarios/furuta-ctrl.toml")),
    ("furuta-feedback", include_str!("../../../scenarios/furuta-feedback.toml")),
    ("furuta-sweep", include_str!("../../../scenarios/furuta-sweep.toml")),
];

pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SimError::invalid(format!("no bundled scenario `{name}`")))?;
    Scenario::parse(text, Overrides::default())
}

#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub name: &'static str,
    /// Part of the acceptance set, as opposed to an additional diagnostic.
    pub primary: bool,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Worker threads of the oscillator sweep check.
    pub workers: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { workers: 4 }
    }
}

/// Bookkeeping shared by all checks.
#[derive(Debug, Default)]
struct Tally {
    /// Single-worker cost of everything timed so far.
    cost: Duration,
    /// Wall time of the same work.
    wall: Duration,
    max_iterations: usize,
    j_max: usize,
    events: usize,
    worst_jump: f64,
}

impl Tally {
    fn absorb(&mut self, other: Tally) {
        self.cost += other.cost;
        self.wall += other.wall;
        self.max_iterations = self.max_iterations.max(other.max_iterations);
        self.j_max = self.j_max.max(other.j_max);
        self.events += other.events;
        self.worst_jump = self.worst_jump.max(other.worst_jump);
    }

    fn observe(&mut self, sc: &Scenario, traj: &Trajectory) -> Result<()> {
        self.max_iterations = self.max_iterations.max(traj.max_iterations);
        self.j_max = self.j_max.max(sc.stepper.j_max);
        let m = model(&sc.plant)?;
        for e in &traj.events {
            // the actuator acts on the first coordinate of both plants
            let lhs = m.mass_matrix(&e.q) * (&e.post_v - &e.pre_v);
            let mut rhs = DVector::zeros(lhs.len());
            rhs[0] = e.impulse;
            self.worst_jump = self.worst_jump.max((lhs - rhs).amax());
            self.events += 1;
        }
        Ok(())
    }

    fn spend(&mut self, d: Duration) {
        self.cost += d;
        self.wall += d;
    }

    fn run(&mut self, sc: &Scenario) -> Result<RunOutput> {
        let t0 = Instant::now();
        let out = simulate(sc)?;
        self.spend(t0.elapsed());
        self.observe(sc, &out.trajectory)?;
        Ok(out)
    }

    fn sweep(&mut self, sc: &Scenario, workers: usize) -> Result<SweepReport> {
        let shared = Mutex::new(Tally::default());
        let report = sweep_cells(sc, workers, |_, out| {
            let mut local = Tally::default();
            local.observe(sc, &out.trajectory)?;
            shared.lock().expect("tally lock").absorb(local);
            Ok(())
        })?;
        let mut t = shared.into_inner().expect("tally lock");
        t.cost = report.cpu();
        t.wall = report.wall;
        self.absorb(t);
        Ok(report)
    }
}

fn check(id: &'static str, name: &'static str, primary: bool, pass: bool, detail: String) -> Check {
    Check {
        id,
        name,
        primary,
        pass,
        detail,
    }
}

fn failed(id: &'static str, name: &'static str, primary: bool, e: SimError) -> Check {
    check(id, name, primary, false, format!("error: {e}"))
}

fn osc_params(sc: &Scenario) -> Result<OscillatorParams> {
    match sc.plant {
        Plant::Oscillator(p) => Ok(p),
        _ => Err(SimError::invalid(format!("`{}` is not an oscillator scenario", sc.name))),
    }
}

fn osc_control(sc: &Scenario) -> Result<OscControlParams> {
    match sc.control {
        ControlSetup::Oscillator(c) => Ok(c),
        _ => Err(SimError::invalid(format!("`{}` has no oscillator controller", sc.name))),
    }
}

/// Largest step-to-step energy increase and its allowance
/// `1e-9 E0 + dt^2 E0`.
fn energy_rise(m: &dyn MechanicalModel<f64>, traj: &Trajectory, dt: f64) -> (f64, f64) {
    let e: Vec<f64> = traj
        .states
        .iter()
        .map(|s| m.energy(&s.q, &s.v).unwrap_or(f64::NAN))
        .collect();
    let rise = e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let scale = e[0].abs().max(f64::MIN_POSITIVE);
    (rise, 1e-9 * scale + dt * dt * scale)
}

fn relative_drift(m: &dyn MechanicalModel<f64>, traj: &Trajectory) -> f64 {
    let e0 = m.energy(&traj.states[0].q, &traj.states[0].v).unwrap_or(f64::NAN);
    traj.states
        .iter()
        .map(|s| ((m.energy(&s.q, &s.v).unwrap_or(f64::NAN) - e0) / e0).abs())
        .fold(0.0, f64::max)
}

/// Runs every check. Each check is evaluated on its own; an error inside
/// one is reported as its failure.
pub fn verify(opts: VerifyOptions) -> Vec<Check> {
    let start = Instant::now();
    let mut tally = Tally::default();
    let mut checks = vec![
        prox_oracle(&mut tally).unwrap_or_else(|e| failed("P01", "prox oracle equivalence", true, e)),
        osc_free(&mut tally).unwrap_or_else(|e| failed("P02", "oscillator free motion", true, e)),
        osc_sweep(&mut tally, opts.workers).unwrap_or_else(|e| failed("P03", "phase-diagram sweep", true, e)),
        osc_controlled(&mut tally, "P04", "controlled oscillator, robust BVP", "osc-ctrl-bvp", |n| n >= 2)
            .unwrap_or_else(|e| failed("P04", "controlled oscillator, robust BVP", true, e)),
        osc_controlled(&mut tally, "P05", "controlled oscillator, shooting", "osc-ctrl-shoot", |n| n == 1)
            .unwrap_or_else(|e| failed("P05", "controlled oscillator, shooting", true, e)),
        bvp_consistency(&mut tally).unwrap_or_else(|e| failed("P06", "robust BVP consistency", true, e)),
        approx_law().unwrap_or_else(|e| failed("P07", "approximate impulse law", true, e)),
        arm_check(),
        furuta_free(&mut tally).unwrap_or_else(|e| failed("P09", "pendulum free motion", true, e)),
        furuta_stabilization(&mut tally).unwrap_or_else(|e| failed("P10", "pendulum stabilization", true, e)),
    ];
    let extras = vec![
        determinism(&mut tally).unwrap_or_else(|e| failed("X01", "deterministic output", false, e)),
        osc_dissipation(&mut tally).unwrap_or_else(|e| failed("X02", "oscillator dissipativity", false, e)),
        order_check(&mut tally).unwrap_or_else(|e| failed("X03", "frictionless convergence order", false, e)),
        step_robustness(&mut tally).unwrap_or_else(|e| failed("X04", "half step size", false, e)),
        mutation_canary(&mut tally).unwrap_or_else(|e| failed("X05", "dissipativity canary", false, e)),
        furuta_free_sweep(&mut tally).unwrap_or_else(|e| failed("X06", "pendulum free sweep", false, e)),
        osc_controlled(&mut tally, "X07", "controlled oscillator, approximate law", "osc-ctrl-approx", |n| n >= 1)
            .map(|mut c| {
                c.primary = false;
                c
            })
            .unwrap_or_else(|e| failed("X07", "controlled oscillator, approximate law", false, e)),
    ];

    checks.push(check(
        "P11",
        "impulse bookkeeping",
        true,
        tally.events > 0 && tally.worst_jump <= 1e-10,
        format!("{} events, worst |M dv - W_u U| = {:.3e}", tally.events, tally.worst_jump),
    ));
    // untimed work (setup, oracles) ran on this thread anyway
    let single = start.elapsed().saturating_sub(tally.wall) + tally.cost;
    checks.push(check(
        "P12",
        "bounded work per step",
        true,
        single < Duration::from_secs(300) && tally.max_iterations <= 2 * tally.j_max,
        format!(
            "single-worker cost {:.1} s (wall {:.1} s), max sweeps per step {} of {}",
            single.as_secs_f64(),
            start.elapsed().as_secs_f64(),
            tally.max_iterations,
            2 * tally.j_max
        ),
    ));
    checks.extend(extras);
    checks
}

pub fn table(checks: &[Check]) -> String {
    let mut out = String::from("id\tstatus\tcheck\tdetail\n");
    for c in checks {
        let _ = writeln!(out, "{}", c.line());
    }
    out
}

fn prox_oracle(tally: &mut Tally) -> Result<Check> {
    let sc = builtin("osc-free")?;
    let p = osc_params(&sc)?;
    let model = Oscillator::new(p)?;
    let cfg = StepperConfig::with_dt(1e-3);
    let dt = cfg.dt;
    let t0 = Instant::now();
    let n = 100;
    let axis: Vec<f64> = (0..n).map(|i| -6.0 + 12.0 * i as f64 / (n - 1) as f64).collect();
    let mut worst: f64 = 0.0;
    let mut sticks = 0;
    for &q in &axis {
        for &v in &axis {
            let s = State::from_slices(&[q, 0.0], &[v, 0.0], 0.0);
            let report = solve_impulses(&model, &s, &cfg, &DVector::zeros(2))?;
            let q_mid = q + 0.5 * dt * v;
            let hx = -p.k1 * q_mid - p.k2 * v;
            let mu = (p.mu1 - p.mu2) / (1.0 + p.v_half * v.abs()) + p.mu2;
            let bound = mu * p.m * p.g * dt;
            let push = p.m * v + hx * dt;
            let expected = if push.abs() <= bound {
                sticks += 1;
                -push
            } else {
                -push.signum() * bound
            };
            worst = worst
                .max((report.impulses[1] - expected).abs())
                .max((report.impulses[0] - p.m * p.g * dt).abs());
        }
    }
    let elapsed = t0.elapsed();
    tally.spend(elapsed);
    Ok(check(
        "P01",
        "prox oracle equivalence",
        true,
        worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!(
            "{n}x{n} grid ({sticks} sticking), worst deviation {worst:.3e}, {:.3} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn osc_free(tally: &mut Tally) -> Result<Check> {
    let sc = builtin("osc-free")?;
    let p = osc_params(&sc)?;
    let out = tally.run(&sc)?;
    let traj = &out.trajectory;
    let dt = sc.stepper.dt;
    let normal_dev = traj
        .states
        .iter()
        .map(|s| s.q[1].abs().max(s.v[1].abs()))
        .fold(0.0, f64::max);
    let lambda_dev = traj
        .reports
        .iter()
        .map(|r| (r.impulses[0] - p.m * p.g * dt).abs())
        .fold(0.0, f64::max);
    let (pass_rest, detail) = match out.summary.rest_since {
        Some(t) => {
            let q = traj.last().q[0];
            let mu = (p.mu1 - p.mu2) + p.mu2 + p.mu3 * (p.omega * t).sin();
            let held = (p.k1 * q).abs() <= mu * p.m * p.g;
            (
                t <= 7.0 && held,
                format!("rest from t = {t:.3} s at q_x = {q:.6}, band {:.4}", mu * p.m * p.g / p.k1),
            )
        }
        None => (false, "still moving at the end".into()),
    };
    Ok(check(
        "P02",
        "oscillator free motion",
        true,
        pass_rest && normal_dev <= 1e-12 && lambda_dev <= 1e-12 && out.summary.non_converged == 0,
        format!("{detail}; normal channel deviation {normal_dev:.1e}, Lambda_U deviation {lambda_dev:.1e}"),
    ))
}

fn osc_sweep(tally: &mut Tally, workers: usize) -> Result<Check> {
    let sc = builtin("osc-sweep")?;
    let report = tally.sweep(&sc, workers)?;
    let met = report.cells.iter().filter(|c| c.goal_met()).count();
    let latest = report
        .cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().and_then(|s| s.rest_since))
        .fold(0.0, f64::max);
    let n = report.cells.len();
    Ok(check(
        "P03",
        "phase-diagram sweep",
        true,
        n == 169 && met == n && report.wall < Duration::from_secs(60),
        format!(
            "{met}/{n} cells at rest in the band, last arrival {latest:.2} s, wall {:.2} s on {workers} workers",
            report.wall.as_secs_f64()
        ),
    ))
}

fn osc_controlled(
    tally: &mut Tally,
    id: &'static str,
    name: &'static str,
    scenario: &str,
    events_ok: fn(usize) -> bool,
) -> Result<Check> {
    let sc = builtin(scenario)?;
    let out = tally.run(&sc)?;
    let s = &out.summary;
    let f = &s.final_state;
    Ok(check(
        id,
        name,
        true,
        s.goal_met == Some(true) && events_ok(s.events),
        format!(
            "q_x = {:.2e}, v_x = {:.2e} at t = {:.1} s after {} impulse events",
            f.q[0], f.v[0], f.t, s.events
        ),
    ))
}

/// Fourth-order Runge-Kutta on `x' = f(x)` over `duration` in `n` steps.
fn rk4<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], mut x: [f64; N], duration: f64, n: usize) -> [f64; N] {
    let h = duration / n as f64;
    let axpy = |x: &[f64; N], k: &[f64; N], a: f64| {
        let mut y = *x;
        for i in 0..N {
            y[i] += a * k[i];
        }
        y
    };
    for _ in 0..n {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, h / 2.0));
        let k3 = f(&axpy(&x, &k2, h / 2.0));
        let k4 = f(&axpy(&x, &k3, h));
        for i in 0..N {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

fn bvp_consistency(tally: &mut Tally) -> Result<Check> {
    let sc = builtin("osc-ctrl-bvp")?;
    let plant = osc_params(&sc)?;
    let ctrl = osc_control(&sc)?;
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut iters = 0;
    for q in [0.5, 1.0, 2.0, -0.5, -1.0, -2.0] {
        let est = robust_bvp_estimate(q, &ctrl, &plant)?;
        iters = iters.max(est.iterations);
        // sliding towards the origin against the lowest friction force
        let slide = -est.v_plus.signum() * (plant.mu2 - plant.mu3) * plant.g;
        let end = rk4(
            |x: &[f64; 2]| [x[1], (-ctrl.k1 * x[0] - ctrl.k2_post * x[1]) / plant.m + slide],
            [q, est.v_plus],
            est.duration,
            20_000,
        );
        worst = worst.max(end[0].abs()).max(end[1].abs());
    }
    tally.spend(t0.elapsed());
    Ok(check(
        "P06",
        "robust BVP consistency",
        true,
        worst <= 1e-6 && iters <= 20,
        format!("worst terminal miss {worst:.3e}, at most {iters} Newton iterations"),
    ))
}

fn approx_law() -> Result<Check> {
    let sc = builtin("osc-ctrl-approx")?;
    let plant = osc_params(&sc)?;
    let ctrl = osc_control(&sc)?;
    let omega2 = ctrl.k1 / plant.m;
    let c_low = (plant.mu2 - plant.mu3) * plant.g / omega2;
    let mut worst: f64 = 0.0;
    let mut odd = true;
    for k in 1..=200 {
        let q = 0.025 * k as f64;
        for x in [q, -q] {
            let direct = -x.signum() * (2.0 * c_low * omega2 * plant.m * plant.m * x.abs()).sqrt();
            worst = worst.max((approx_impulse(x, &ctrl, &plant) - direct).abs());
        }
        odd &= approx_impulse(-q, &ctrl, &plant) == -approx_impulse(q, &ctrl, &plant);
    }
    Ok(check(
        "P07",
        "approximate impulse law",
        true,
        worst <= 1e-12 && odd,
        format!("400 points, worst deviation {worst:.1e}, odd symmetry {}", if odd { "exact" } else { "broken" }),
    ))
}

/// Friction arm of a uniformly loaded annulus, `int r dA / A`, by Simpson's
/// rule in the radius and the trapezoidal rule in the angle.
fn annulus_arm(r1: f64, r2: f64, nr: usize, nt: usize) -> f64 {
    let h = (r1 - r2) / nr as f64;
    let dtheta = std::f64::consts::TAU / nt as f64;
    let (mut moment, mut area) = (0.0, 0.0);
    // the integrand does not depend on the angle; the grid is kept for
    // a literal two-dimensional rule
    for _ in 0..nt {
        for i in 0..=nr {
            let r = r2 + i as f64 * h;
            let w = if i == 0 || i == nr {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0
                * dtheta;
            moment += w * r * r;
            area += w * r;
        }
    }
    moment / area
}

fn arm_check() -> Check {
    let name = "equivalent friction arm";
    let sc = match builtin("furuta-free") {
        Ok(sc) => sc,
        Err(e) => return failed("P08", name, true, e),
    };
    let Plant::Furuta(p) = sc.plant else {
        return failed("P08", name, true, SimError::invalid("furuta-free is not a pendulum scenario"));
    };
    match equivalent_arm(p.r1, p.r2) {
        Ok(arm) => {
            let quad = annulus_arm(p.r1, p.r2, 400, 400);
            check(
                "P08",
                name,
                true,
                (0.0585..=0.0592).contains(&arm) && (arm - quad).abs() <= 1e-10,
                format!("R_E = {arm:.10} m, quadrature {quad:.10} m, difference {:.1e}", (arm - quad).abs()),
            )
        }
        Err(e) => failed("P08", name, true, e.into()),
    }
}

fn furuta_free(tally: &mut Tally) -> Result<Check> {
    let sc = builtin("furuta-free")?;
    let m = model(&sc.plant)?;
    let out = tally.run(&sc)?;
    let (rise, allowed) = energy_rise(m.as_ref(), &out.trajectory, sc.stepper.dt);
    let s = &out.summary;

    let mut frictionless = sc.clone();
    let Plant::Furuta(p) = &mut frictionless.plant else {
        return Err(SimError::invalid("furuta-free is not a pendulum scenario"));
    };
    p.mu = 0.0;
    frictionless.t_end = 10.0;
    let mf = model(&frictionless.plant)?;
    let drift = relative_drift(mf.as_ref(), &tally.run(&frictionless)?.trajectory);
    let mut explicit = frictionless.clone();
    explicit.stepper.force_velocity = ForceVelocity::Start;
    let drift_explicit = relative_drift(mf.as_ref(), &tally.run(&explicit)?.trajectory);

    let rest = s.rest_since.filter(|&t| t <= 30.0);
    Ok(check(
        "P09",
        "pendulum free motion",
        true,
        rest.is_some() && rise <= allowed && s.non_converged == 0 && drift <= 1e-3,
        format!(
            "rest from {}, max energy rise {rise:.2e} (allowed {allowed:.2e}), {} unconverged solves, frictionless drift {drift:.2e} (explicit-velocity forces {drift_explicit:.2e})",
            rest.map_or("never".into(), |t| format!("t = {t:.3} s")),
            s.non_converged
        ),
    ))
}

fn furuta_stabilization(tally: &mut Tally) -> Result<Check> {
    let sc = builtin("furuta-ctrl")?;
    let up = match sc.control {
        ControlSetup::Furuta(c) => c.theta_up,
        _ => return Err(SimError::invalid("furuta-ctrl has no pendulum controller")),
    };
    let ctrl = tally.run(&sc)?;
    let e_ctrl = wrapped_error(ctrl.summary.final_state.q[1], up);

    let fb = tally.run(&builtin("furuta-feedback")?)?;
    let f = &fb.summary.final_state;
    let e_fb = wrapped_error(f.q[1], up);
    let fb_stuck = f.v[1].abs() <= 1e-3;
    let fb_ok = fb_stuck && e_fb.abs() > 1e-2;

    let report = tally.sweep(&builtin("furuta-sweep")?, 1)?;
    let met = report.cells.iter().filter(|c| c.goal_met()).count();
    let n = report.cells.len();
    let sweep_ok = n > 0 && met as f64 >= 0.9 * n as f64;

    Ok(check(
        "P10",
        "pendulum stabilization",
        true,
        ctrl.summary.goal_met == Some(true) && fb_ok && sweep_ok,
        format!(
            "impulses: error {e_ctrl:.2e} rad, rate {:.1e}, {} events; feedback only: error {e_fb:.3} rad, pendulum rate {:.3} rad/s ({}); sweep {met}/{n}",
            ctrl.summary.final_state.v[1],
            ctrl.summary.events,
            f.v[1],
            if fb_stuck { "stuck" } else { "still moving, not stuck" },
        ),
    ))
}

fn render(sc: &Scenario, out: &RunOutput) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    out.trajectory.write_csv(&mut buf).map_err(|source| SimError::Write {
        path: PathBuf::from("<memory>"),
        source,
    })?;
    stickslip_core::control::write_events_csv(&out.trajectory.events, sc.dof(), &mut buf).map_err(|source| {
        SimError::Write {
            path: PathBuf::from("<memory>"),
            source,
        }
    })?;
    buf.extend(crate::run::summary_text(sc, &out.summary).into_bytes());
    Ok(buf)
}

fn determinism(tally: &mut Tally) -> Result<Check> {
    let mut same = true;
    for name in ["osc-ctrl-shoot", "furuta-ctrl"] {
        let sc = builtin(name)?;
        let a = render(&sc, &tally.run(&sc)?)?;
        let b = render(&sc, &tally.run(&sc)?)?;
        same &= a == b;
    }
    let sc = builtin("furuta-free-sweep")?;
    let base = std::env::temp_dir().join(format!("stickslip-verify-{}", std::process::id()));
    let mut phases = Vec::new();
    for workers in [1, 3] {
        let t0 = Instant::now();
        let (dir, _) = run_sweep(&sc, &base.join(format!("w{workers}")), workers)?;
        tally.cost += t0.elapsed() * workers as u32;
        tally.wall += t0.elapsed();
        let read = |f: &str| {
            let p = dir.join(f);
            std::fs::read(&p).map_err(|source| SimError::Read { path: p, source })
        };
        phases.push((read("phase.csv")?, read("cells.csv")?));
    }
    let _ = std::fs::remove_dir_all(&base);
    let sweep_same = phases[0] == phases[1];
    Ok(check(
        "X01",
        "deterministic output",
        false,
        same && sweep_same,
        format!(
            "repeated runs {}, sweep files on 1 and 3 workers {}",
            if same { "byte-identical" } else { "differ" },
            if sweep_same { "byte-identical" } else { "differ" }
        ),
    ))
}

fn osc_dissipation(tally: &mut Tally) -> Result<Check> {
    let mut sc = builtin("osc-free")?;
    let Plant::Oscillator(p) = &mut sc.plant else {
        return Err(SimError::invalid("osc-free is not an oscillator scenario"));
    };
    // time-independent friction bound
    p.mu3 = 0.0;
    let m = model(&sc.plant)?;
    let out = tally.run(&sc)?;
    let (rise, allowed) = energy_rise(m.as_ref(), &out.trajectory, sc.stepper.dt);
    Ok(check(
        "X02",
        "oscillator dissipativity",
        false,
        rise <= allowed,
        format!("max energy rise {rise:.2e}, allowed {allowed:.2e}"),
    ))
}

fn order_check(tally: &mut Tally) -> Result<Check> {
    let t0 = Instant::now();
    let sc = builtin("osc-free")?;
    let p = OscillatorParams {
        k2: 0.0,
        mu1: 0.0,
        mu2: 0.0,
        mu3: 0.0,
        ..osc_params(&sc)?
    };
    let osc = ReducedOscillator::new(p)?;
    let w = (p.k1 / p.m).sqrt();
    let t_end = 2.0;
    let exact = -4.0 * (w * t_end).cos() - 4.0 / w * (w * t_end).sin();
    let steps = [1e-2, 5e-3, 2.5e-3];
    let mut osc_err = Vec::new();
    for dt in steps {
        let s = State::from_slices(&[-4.0], &[-4.0], 0.0);
        let end = advance(&osc, s, t_end, &StepperConfig::with_dt(dt), &mut NoControl)?;
        osc_err.push((end.q[0] - exact).abs());
    }

    let Plant::Furuta(mut fp) = builtin("furuta-free")?.plant else {
        return Err(SimError::invalid("furuta-free is not a pendulum scenario"));
    };
    fp.mu = 0.0;
    let fur = stickslip_core::Furuta::new(fp)?;
    let x0 = [0.0, std::f64::consts::FRAC_PI_2, 0.0, std::f64::consts::PI];
    let reference = rk4(
        |x: &[f64; 4]| {
            let m: DMatrix<f64> = mass_matrix(x[1], &fp);
            let h = h_vector(x[1], x[2], x[3], &fp);
            let a = m.lu().solve(&h).expect("mass matrix is invertible");
            [x[2], x[3], a[0], a[1]]
        },
        x0,
        t_end,
        200_000,
    );
    let mut fur_err = Vec::new();
    for dt in steps {
        let cfg = StepperConfig {
            force_velocity: ForceVelocity::Midpoint,
            ..StepperConfig::with_dt(dt)
        };
        let s = State::from_slices(&x0[..2], &x0[2..], 0.0);
        let end = advance(&fur, s, t_end, &cfg, &mut NoControl)?;
        let err = (0..2)
            .map(|i| (end.q[i] - reference[i]).abs().max((end.v[i] - reference[2 + i]).abs()))
            .fold(0.0, f64::max);
        fur_err.push(err);
    }
    tally.spend(t0.elapsed());
    let order = |e: &[f64]| {
        e.windows(2)
            .map(|w| (w[0] / w[1]).log2())
            .fold(f64::INFINITY, f64::min)
    };
    let (oo, of) = (order(&osc_err), order(&fur_err));
    Ok(check(
        "X03",
        "frictionless convergence order",
        false,
        oo >= 0.9 && of >= 0.9,
        format!("observed order: oscillator {oo:.2}, pendulum {of:.2}"),
    ))
}

fn step_robustness(tally: &mut Tally) -> Result<Check> {
    let halve = |name: &str| -> Result<Scenario> {
        let mut sc = builtin(name)?;
        sc.stepper.dt = 5e-4;
        Ok(sc)
    };
    let osc = tally.run(&halve("osc-free")?)?;
    let sc = halve("furuta-free")?;
    let m = model(&sc.plant)?;
    let fur = tally.run(&sc)?;
    let (rise, allowed) = energy_rise(m.as_ref(), &fur.trajectory, sc.stepper.dt);
    let ctrl = tally.run(&halve("furuta-ctrl")?)?;
    let pass = osc.summary.goal_met == Some(true)
        && fur.summary.goal_met == Some(true)
        && fur.summary.non_converged == 0
        && rise <= allowed
        && ctrl.summary.goal_met == Some(true);
    Ok(check(
        "X04",
        "half step size",
        false,
        pass,
        format!(
            "dt = 5e-4: oscillator rest from {:?} s, pendulum rest from {:?} s (energy rise {rise:.1e}), stabilized {}",
            osc.summary.rest_since.map(|t| (t * 1e3).round() / 1e3),
            fur.summary.rest_since.map(|t| (t * 1e3).round() / 1e3),
            ctrl.summary.goal_met == Some(true)
        ),
    ))
}

/// Oscillator with an extra force along the motion, `+2 mu1 m g sign(v_x)`,
/// which outweighs friction and feeds energy in. The dissipativity check must notice it.
struct Driven(Oscillator);

impl MechanicalModel<f64> for Driven {
    fn dof(&self) -> usize {
        self.0.dof()
    }
    fn n_constraints(&self) -> usize {
        self.0.n_constraints()
    }
    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.0.mass_matrix(q)
    }
    fn smooth_forces(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let p = &self.0.params;
        let mut h = self.0.smooth_forces(q, v);
        if v[0] != 0.0 {
            h[0] += 2.0 * p.mu1 * p.m * p.g * v[0].signum();
        }
        h
    }
    fn constraint_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.0.constraint_matrix(q)
    }
    fn constraint_sets(&self, state: &State, dt: f64, gamma: f64) -> Vec<Option<ConvexSet<f64>>> {
        self.0.constraint_sets(state, dt, gamma)
    }
    fn initial_impulses(&self, state: &State, dt: f64) -> DVector<f64> {
        self.0.initial_impulses(state, dt)
    }
    fn energy(&self, q: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
        self.0.energy(q, v)
    }
}

fn mutation_canary(tally: &mut Tally) -> Result<Check> {
    let sc = builtin("osc-free")?;
    let p = OscillatorParams {
        mu3: 0.0,
        ..osc_params(&sc)?
    };
    let t0 = Instant::now();
    let driven = Driven(Oscillator::new(p)?);
    let traj = integrate(&driven, sc.initial.clone(), sc.t_end, &sc.stepper, &mut NoControl)?;
    tally.spend(t0.elapsed());
    let (rise, allowed) = energy_rise(&driven, &traj, sc.stepper.dt);
    Ok(check(
        "X05",
        "dissipativity canary",
        false,
        rise > allowed,
        format!("driven oscillator energy rise {rise:.2e} against allowance {allowed:.2e}"),
    ))
}

fn furuta_free_sweep(tally: &mut Tally) -> Result<Check> {
    let report = tally.sweep(&builtin("furuta-free-sweep")?, 1)?;
    let met = report.cells.iter().filter(|c| c.goal_met()).count();
    let n = report.cells.len();
    Ok(check(
        "X06",
        "pendulum free sweep",
        false,
        met == n && n > 0,
        format!("{met}/{n} cells end with both rates at rest"),
    ))
}
