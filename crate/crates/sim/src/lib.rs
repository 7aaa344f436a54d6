//! Scenario runner for the stick-slip oscillator and the frictional rotary
//! pendulum: single runs, initial-condition sweeps and acceptance checks.

pub mod error;
pub mod run;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use error::{Result, SimError};
pub use run::{run_scenario, simulate, RunOutput, RunSummary};
pub use scenario::{Overrides, Scenario};
pub use sweep::{run_sweep, CellResult, SweepReport};
pub use verify::{verify, Check, VerifyOptions};
