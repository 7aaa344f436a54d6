use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use stickslip_sim::{run_scenario, run_sweep, verify, Overrides, Scenario, SimError, VerifyOptions};

#[derive(Parser)]
#[command(name = "stickslip", version, about = "Simulate stick-slip systems with set-valued friction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the step size of the scenario.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Override the end time of the scenario.
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// Directory receiving one sub-directory per scenario.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 4)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write trajectory, events and summary.
    Run { scenario: PathBuf },
    /// Integrate every cell of the scenario's initial-condition grid.
    Sweep { scenario: PathBuf },
    /// Run the acceptance checks on the bundled scenarios.
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // exit code 2 is reserved for a failed verify
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 3 })
        }
    }
}

fn execute(cli: &Cli) -> Result<ExitCode, SimError> {
    let overrides = Overrides {
        dt: cli.dt,
        t_end: cli.t_end,
    };
    match &cli.command {
        Command::Run { scenario } => {
            let sc = Scenario::load(scenario, overrides)?;
            let t0 = Instant::now();
            let (dir, out) = run_scenario(&sc, &cli.out_dir)?;
            let s = &out.summary;
            println!(
                "{}: {} steps, {} events, {} unconverged solves, goal {}, {:.3} s -> {}",
                sc.name,
                s.steps,
                s.events,
                s.non_converged,
                s.goal_met.map_or("n/a", |g| if g { "met" } else { "missed" }),
                t0.elapsed().as_secs_f64(),
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario } => {
            let sc = Scenario::load(scenario, overrides)?;
            let (dir, report) = run_sweep(&sc, &cli.out_dir, cli.workers)?;
            let n = report.cells.len();
            let met = report.cells.iter().filter(|c| c.goal_met()).count();
            let failed = report.cells.iter().filter(|c| c.outcome.is_err()).count();
            println!(
                "{}: {n} cells, goal met in {met}, {failed} failed, {:.2} s on {} workers -> {}",
                sc.name,
                report.wall.as_secs_f64(),
                cli.workers,
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            if cli.dt.is_some() || cli.t_end.is_some() {
                return Err(SimError::Invalid("verify runs the bundled scenarios as they are; drop --dt/--t-end".into()));
            }
            if cli.workers == 0 {
                return Err(SimError::Invalid("workers must be >= 1".into()));
            }
            let checks = verify(VerifyOptions { workers: cli.workers });
            print!("{}", stickslip_sim::verify::table(&checks));
            let failed = checks.iter().filter(|c| !c.pass).count();
            println!("{} checks, {} failed", checks.len(), failed);
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}
