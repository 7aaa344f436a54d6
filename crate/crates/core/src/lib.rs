//! Non-smooth rigid-body mechanics with set-valued friction and contact
//! laws, integrated by a Moreau midpoint time-stepping scheme.
//!
//! All routines are generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`). The aliases at the crate root fix `f64`.

pub mod control;
pub mod error;
pub mod furuta;
pub mod oscillator;
mod scalar;
pub mod setvalued;
pub mod stepper;

pub use error::{Error, Result};
pub use scalar::Real;
pub use setvalued::{coulomb_sliding_force, prox, prox_residual, Branch, ProxResidualBranch};
pub use stepper::{
    advance, apply_velocity_jump, integrate, midpoint_config, solve_impulses, step, ConstraintMode,
    Controller, ForceVelocity, MechanicalModel, NoControl,
};

pub type ConvexSet = setvalued::ConvexSet<f64>;
pub type State = stepper::State<f64>;
pub type StepperConfig = stepper::StepperConfig<f64>;
pub type ImpulseSolveReport = stepper::ImpulseSolveReport<f64>;
pub type Trajectory = stepper::Trajectory<f64>;

pub type OscillatorParams = oscillator::OscillatorParams<f64>;
pub type Oscillator = oscillator::Oscillator<f64>;
pub type ReducedOscillator = oscillator::ReducedOscillator<f64>;

pub type FurutaParams = furuta::FurutaParams<f64>;
pub type Furuta = furuta::Furuta<f64>;

pub type ControlEvent = control::ControlEvent<f64>;
pub type ShootParams = control::ShootParams<f64>;
pub type OscControlParams = control::OscControlParams<f64>;
pub type OscillatorController = control::OscillatorController<f64>;
pub type FurutaControlParams = control::FurutaControlParams<f64>;
pub type FurutaController = control::FurutaController<f64>;
