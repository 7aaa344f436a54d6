use nalgebra::{DMatrix, DVector};

use super::*;
use crate::furuta::{Furuta, FurutaParams};
use crate::oscillator::{friction_coefficient, Oscillator, OscillatorParams, ReducedOscillator};

fn osc_params() -> OscillatorParams<f64> {
    OscillatorParams {
        m: 1.0,
        g: 10.0,
        k1: 1.0,
        k2: 0.5,
        mu1: 0.4,
        mu2: 0.3,
        mu3: 0.05,
        omega: 4.0,
        v_half: 0.5,
    }
}

fn furuta_params() -> FurutaParams<f64> {
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

/// Unconstrained point masses.
struct Particle {
    dof: usize,
}

impl MechanicalModel<f64> for Particle {
    fn dof(&self) -> usize {
        self.dof
    }
    fn n_constraints(&self) -> usize {
        0
    }
    fn mass_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dof, self.dof)
    }
    fn smooth_forces(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dof)
    }
    fn constraint_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.dof, 0)
    }
    fn constraint_sets(&self, _s: &State<f64>, _dt: f64, _g: f64) -> Vec<Option<ConvexSet<f64>>> {
        Vec::new()
    }
}

fn zero_u(n: usize) -> DVector<f64> {
    DVector::zeros(n)
}

#[test]
fn midpoint_examples() {
    let s = State::from_slices(&[0.0f64], &[2.0], 0.0);
    assert!((midpoint_config(&s, 0.1)[0] - 0.1).abs() < 1e-15);
    let s = State::from_slices(&[1.0, -1.0], &[0.0, 0.0], 0.0);
    assert_eq!(midpoint_config(&s, 0.01).as_slice(), &[1.0, -1.0]);
    let s = State::from_slices(&[-4.0f64], &[-4.0], 0.0);
    assert!((midpoint_config(&s, 1e-3)[0] + 4.002).abs() < 1e-15);
}

#[test]
fn config_validation() {
    let ok = StepperConfig::<f64>::default();
    assert!(ok.validate().is_ok());
    assert!(StepperConfig { dt: 0.0, ..ok.clone() }.validate().is_err());
    assert!(StepperConfig { tol: 0.0, ..ok.clone() }.validate().is_err());
    assert!(StepperConfig { j_max: 0, ..ok.clone() }.validate().is_err());
    assert!(StepperConfig { gamma: 1.5, ..ok.clone() }.validate().is_err());
    assert!(StepperConfig { restitution: -0.1, ..ok.clone() }.validate().is_err());
    assert!(StepperConfig { r_init: Some(vec![0.0]), ..ok }.validate().is_err());
}

#[test]
fn free_particle_needs_one_sweep() {
    let model = Particle { dof: 2 };
    let s = State::from_slices(&[0.0, 0.0], &[1.0, -2.0], 0.0);
    let report = solve_impulses(&model, &s, &StepperConfig::default(), &zero_u(2)).unwrap();
    assert_eq!(report.impulses.len(), 0);
    assert_eq!(report.iterations, 1);
    assert!(report.converged);
}

#[test]
fn free_flight_is_exact() {
    let model = Particle { dof: 2 };
    let s = State::from_slices(&[0.5, -1.0], &[0.25, -0.75], 0.0);
    let traj = integrate(&model, s, 2.0, &StepperConfig::with_dt(0.125), &mut NoControl).unwrap();
    assert_eq!(traj.states.len(), 17);
    let end = traj.last();
    assert_eq!(end.q.as_slice(), &[1.0, -2.5]);
    assert_eq!(end.v.as_slice(), &[0.25, -0.75]);
}

#[test]
fn zero_duration_keeps_initial_state() {
    let model = Particle { dof: 1 };
    let s = State::from_slices(&[1.0], &[1.0], 3.0);
    let traj = integrate(&model, s.clone(), 3.0, &StepperConfig::default(), &mut NoControl).unwrap();
    assert_eq!(traj.states, vec![s.clone()]);
    assert!(integrate(&model, s, 2.0, &StepperConfig::default(), &mut NoControl).is_err());
}

#[test]
fn velocity_jump_examples() {
    let model = Particle { dof: 1 };
    let s = State::from_slices(&[2.0], &[1.0], 0.5);
    assert_eq!(apply_velocity_jump(&model, &s, &zero_u(1)).unwrap(), s);
    let j = apply_velocity_jump(&model, &s, &DVector::from_element(1, -3.0)).unwrap();
    assert_eq!(j.v[0], -2.0);
    assert_eq!(j.q, s.q);
    assert_eq!(j.t, s.t);
}

#[test]
fn furuta_velocity_jump_moves_pendulum_by_coupling() {
    let p = furuta_params();
    let model = Furuta::new(p).unwrap();
    for theta2 in [0.0, 0.4, -1.0, 2.5] {
        let s = State::from_slices(&[0.1, theta2], &[0.0, 0.0], 0.0);
        let j = apply_velocity_jump(&model, &s, &DVector::from_column_slice(&[0.01, 0.0])).unwrap();
        let ratio = -(p.m2 * p.l1 * p.c2 * f64::cos(theta2)) / (p.m2 * p.c2 * p.c2 + p.j2);
        assert!((j.v[1] - ratio * j.v[0]).abs() < 1e-14);
    }
}

/// Closed-form tangential step of the oscillator: stick when the static
/// impulse fits in the friction disc, otherwise slide on the boundary.
fn oscillator_oracle(p: &OscillatorParams<f64>, qx: f64, vx: f64, t: f64, dt: f64) -> (f64, f64) {
    let q_mid = qx + 0.5 * dt * vx;
    let h = -p.k1 * q_mid - p.k2 * vx;
    let rho = friction_coefficient(qx, vx, t, p) * p.m * p.g * dt;
    let stick = -p.m * vx - h * dt;
    let lambda = if stick.abs() <= rho { stick } else { rho * stick.signum() };
    (lambda, vx + (h * dt + lambda) / p.m)
}

#[test]
fn oscillator_matches_closed_form_on_grid() {
    let p = osc_params();
    let model = Oscillator::new(p).unwrap();
    let cfg = StepperConfig::with_dt(1e-3);
    let n = 100;
    for i in 0..n {
        for j in 0..n {
            let qx = -6.0 + 12.0 * i as f64 / (n - 1) as f64;
            let vx = -6.0 + 12.0 * j as f64 / (n - 1) as f64;
            let t = 0.01 * (i + j) as f64;
            let s = State::from_slices(&[qx, 0.0], &[vx, 0.0], t);
            let (next, report) = step(&model, &s, &cfg, &zero_u(2)).unwrap();
            let (lambda, v_plus) = oscillator_oracle(&p, qx, vx, t, cfg.dt);
            assert!(report.converged);
            assert!((report.impulses[1] - lambda).abs() <= 1e-10, "{qx} {vx}");
            assert!((next.v[0] - v_plus).abs() <= 1e-10, "{qx} {vx}");
            assert!((report.impulses[0] - p.m * p.g * cfg.dt).abs() <= 1e-15);
            assert_eq!(next.q[1], 0.0);
            assert_eq!(next.v[1], 0.0);
        }
    }
}

#[test]
fn oscillator_cases_in_detail() {
    let p = osc_params();
    let model = Oscillator::new(p).unwrap();
    let cfg = StepperConfig::with_dt(1e-3);
    // sliding: Lambda_T = -sign(v+) mu m g dt
    let s = State::from_slices(&[-4.0, 0.0], &[-4.0, 0.0], 0.0);
    let (next, report) = step(&model, &s, &cfg, &zero_u(2)).unwrap();
    let rho = friction_coefficient(-4.0, -4.0, 0.0, &p) * 10.0 * 1e-3;
    assert_eq!(report.impulses[1], rho);
    assert!(next.v[0] < 0.0);
    assert_eq!(report.modes[1], ConstraintMode::SlipNeg);
    assert_eq!(report.modes[0], ConstraintMode::Stick);

    // sticking: Lambda_T = -m v - h dt, v+ = 0
    let s = State::from_slices(&[1.0, 0.0], &[1e-3, 0.0], 0.0);
    let (next, report) = step(&model, &s, &cfg, &zero_u(2)).unwrap();
    let h = -(1.0 + 0.5e-6) - 0.5e-3;
    assert!((report.impulses[1] - (-1e-3 - h * 1e-3)).abs() < 1e-15);
    assert!(next.v[0].abs() < 1e-15);
    assert_eq!(report.modes[1], ConstraintMode::Stick);
}

#[test]
fn oscillator_at_rest_in_stick_band_stays() {
    let model = Oscillator::new(osc_params()).unwrap();
    let s = State::from_slices(&[2.0, 0.0], &[0.0, 0.0], 0.0);
    let (next, _) = step(&model, &s, &StepperConfig::default(), &zero_u(2)).unwrap();
    assert_eq!(next.q, s.q);
    assert!(next.v.iter().all(|v| v.abs() < 1e-15));
    assert_eq!(next.t, 1e-3);
}

#[test]
fn restitution_only_biases_unilateral_constraints() {
    let model = Oscillator::new(osc_params()).unwrap();
    // approaching the plane from above
    let s = State::from_slices(&[0.0, 0.0], &[0.0, -1.0], 0.0);
    let cfg = StepperConfig { restitution: 0.5, ..StepperConfig::with_dt(1e-3) };
    let (next, report) = step(&model, &s, &cfg, &zero_u(2)).unwrap();
    assert!(report.converged);
    assert!((next.v[1] - 0.5).abs() < 1e-12);
    let plastic = StepperConfig::with_dt(1e-3);
    let (next, _) = step(&model, &s, &plastic, &zero_u(2)).unwrap();
    assert!(next.v[1].abs() < 1e-12);
}

#[test]
fn lifted_mass_flies_freely() {
    let model = Oscillator::new(osc_params()).unwrap();
    let s = State::from_slices(&[0.0, 1.0], &[0.0, 0.0], 0.0);
    let (next, report) = step(&model, &s, &StepperConfig::default(), &zero_u(2)).unwrap();
    assert_eq!(report.modes, vec![ConstraintMode::Open, ConstraintMode::Open]);
    assert_eq!(report.impulses.as_slice(), &[0.0, 0.0]);
    assert!((next.v[1] + 10.0 * 1e-3).abs() < 1e-15);
}

#[test]
fn furuta_at_rest_holds_with_coupled_stick_impulses() {
    let p = furuta_params();
    let model = Furuta::new(p).unwrap();
    let cfg = StepperConfig::with_dt(1e-3);
    for theta2 in [0.0, 0.01, -0.02, std::f64::consts::PI] {
        let s = State::from_slices(&[0.3, theta2], &[0.0, 0.0], 0.0);
        let q_mid = midpoint_config(&s, cfg.dt);
        let h = model.smooth_forces(&q_mid, &s.v);
        let m = model.mass_matrix(&q_mid);
        // brute force: the impulse that cancels all motion
        let stick = -(&m * &s.v) - &h * cfg.dt;
        let (r1, r2) = model.friction_radii(&s, cfg.dt);
        assert!(stick[0].abs() <= r1 && stick[1].abs() <= r2);
        let (next, report) = step(&model, &s, &cfg, &zero_u(2)).unwrap();
        assert!(report.converged);
        assert!((report.impulses - &stick).amax() < 1e-11);
        assert!(next.v.amax() < 1e-9);
        assert_eq!(report.modes, vec![ConstraintMode::Stick; 2]);
    }
}

#[test]
fn reports_are_admissible_along_trajectories() {
    let cfg = StepperConfig::with_dt(1e-3);
    let osc = Oscillator::new(osc_params()).unwrap();
    let traj_osc = integrate(&osc, State::from_slices(&[-4.0, 0.0], &[-4.0, 0.0], 0.0), 7.0, &cfg, &mut NoControl).unwrap();
    let fur = Furuta::new(furuta_params()).unwrap();
    let s = State::from_slices(&[0.0, std::f64::consts::FRAC_PI_2], &[0.0, std::f64::consts::PI], 0.0);
    let traj_fur = integrate(&fur, s, 10.0, &cfg, &mut NoControl).unwrap();
    for traj in [&traj_osc, &traj_fur] {
        assert_eq!(traj.non_converged, 0);
        for r in &traj.reports {
            for k in 0..r.impulses.len() {
                let l = r.impulses[k];
                let g = r.gdot[k];
                match (r.modes[k], r.sets[k]) {
                    (ConstraintMode::Stick, _) => assert!(g.abs() <= cfg.stick_tol),
                    (ConstraintMode::SlipPos, Some(ConvexSet::Disc(rho))) => {
                        assert_eq!(l, -rho);
                        assert!(g > 0.0);
                    }
                    (ConstraintMode::SlipNeg, Some(ConvexSet::Disc(rho))) => {
                        assert_eq!(l, rho);
                        assert!(g < 0.0);
                    }
                    (ConstraintMode::Open, _) => assert_eq!(l, 0.0),
                    other => panic!("unexpected mode/set pair {other:?}"),
                }
                if r.sets[k] == Some(ConvexSet::NonNegHalfLine) {
                    assert!(l >= 0.0);
                    assert!(l * g <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn reduced_model_matches_full_oscillator_bit_for_bit() {
    let p = osc_params();
    let full = Oscillator::new(p).unwrap();
    let reduced = ReducedOscillator::new(p).unwrap();
    let cfg = StepperConfig::with_dt(1e-3);
    let a = integrate(&full, State::from_slices(&[-4.0, 0.0], &[-4.0, 0.0], 0.0), 7.0, &cfg, &mut NoControl).unwrap();
    let b = integrate(&reduced, State::from_slices(&[-4.0], &[-4.0], 0.0), 7.0, &cfg, &mut NoControl).unwrap();
    assert_eq!(a.states.len(), b.states.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.q[0].to_bits(), y.q[0].to_bits());
        assert_eq!(x.v[0].to_bits(), y.v[0].to_bits());
    }
}

/// Undamped, frictionless oscillator: `q = q0 cos(t) + v0 sin(t)` for unit
/// mass and stiffness.
#[test]
fn frictionless_order_is_at_least_one() {
    let p = OscillatorParams { k2: 0.0, mu1: 0.0, mu2: 0.0, mu3: 0.0, ..osc_params() };
    let model = ReducedOscillator::new(p).unwrap();
    let t_end = 2.0;
    let exact = -4.0 * f64::cos(t_end) - 4.0 * f64::sin(t_end);
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dt| {
            let s = State::from_slices(&[-4.0f64], &[-4.0], 0.0);
            let end = advance(&model, s, t_end, &StepperConfig::with_dt(dt), &mut NoControl).unwrap();
            (end.q[0] - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 0.9, "{errs:?}");
    }
}

#[test]
fn energy_never_increases_in_free_motion() {
    let cfg = StepperConfig::with_dt(1e-3);
    let osc = Oscillator::new(OscillatorParams { mu3: 0.0, ..osc_params() }).unwrap();
    let traj = integrate(&osc, State::from_slices(&[-4.0, 0.0], &[-4.0, 0.0], 0.0), 7.0, &cfg, &mut NoControl).unwrap();
    let e: Vec<f64> = traj.states.iter().map(|s| osc.energy(&s.q, &s.v).unwrap()).collect();
    let tol = 1e-9 * e[0] + cfg.dt * cfg.dt * e[0];
    for w in e.windows(2) {
        assert!(w[1] <= w[0] + tol, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn single_precision_steps() {
    let p = OscillatorParams::<f32> {
        m: 1.0,
        g: 10.0,
        k1: 1.0,
        k2: 0.5,
        mu1: 0.4,
        mu2: 0.3,
        mu3: 0.05,
        omega: 4.0,
        v_half: 0.5,
    };
    let model = ReducedOscillator::new(p).unwrap();
    let cfg = StepperConfig::<f32> { tol: 1e-6, ..StepperConfig::with_dt(1e-3) };
    let end = advance(&model, State::from_slices(&[-4.0f32], &[-4.0], 0.0), 7.0, &cfg, &mut NoControl).unwrap();
    assert!(end.v[0].abs() < 1e-4);
    assert!(end.q[0].abs() <= 4.5);
}

fn frictionless_furuta_drift(force_velocity: ForceVelocity) -> f64 {
    let model = Furuta::new(FurutaParams { mu: 0.0, ..furuta_params() }).unwrap();
    let cfg = StepperConfig { force_velocity, ..StepperConfig::with_dt(1e-3) };
    let s0 = State::from_slices(&[0.0, std::f64::consts::FRAC_PI_2], &[0.0, std::f64::consts::PI], 0.0);
    let e0 = model.energy(&s0.q, &s0.v).unwrap();
    let traj = integrate(&model, s0, 10.0, &cfg, &mut NoControl).unwrap();
    traj.states
        .iter()
        .map(|s| ((model.energy(&s.q, &s.v).unwrap() - e0) / e0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn midpoint_velocity_removes_energy_drift() {
    let explicit = frictionless_furuta_drift(ForceVelocity::Start);
    let midpoint = frictionless_furuta_drift(ForceVelocity::Midpoint);
    assert!(midpoint < 1e-4, "{midpoint}");
    assert!(explicit > 100.0 * midpoint, "{explicit} vs {midpoint}");
}

#[test]
fn midpoint_velocity_is_inert_without_velocity_forces() {
    let p = OscillatorParams { k2: 0.0, ..osc_params() };
    let model = Oscillator::new(p).unwrap();
    let s0 = State::from_slices(&[-4.0, 0.0], &[-4.0, 0.0], 0.0);
    let a = advance(&model, s0.clone(), 3.0, &StepperConfig::with_dt(1e-3), &mut NoControl).unwrap();
    let cfg = StepperConfig { force_velocity: ForceVelocity::Midpoint, ..StepperConfig::with_dt(1e-3) };
    let b = advance(&model, s0, 3.0, &cfg, &mut NoControl).unwrap();
    assert!((&a.q - &b.q).amax() < 1e-12 && (&a.v - &b.v).amax() < 1e-12);
}
