//! Initial-condition sweeps. Cells run on a worker pool, each writes its own
//! file, and the files are merged in cell order afterwards.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::run::{create, make_dir, num, simulate_from, write_err, RunOutput, RunSummary};
use crate::scenario::{Scenario, Sweep};

#[derive(Debug, Clone)]
pub struct CellResult {
    pub index: usize,
    pub coords: Vec<f64>,
    /// Failures are kept per cell and do not stop the sweep.
    pub outcome: std::result::Result<RunSummary, String>,
    pub elapsed: Duration,
}

impl CellResult {
    pub fn goal_met(&self) -> bool {
        matches!(&self.outcome, Ok(s) if s.goal_met == Some(true))
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cells: Vec<CellResult>,
    pub wall: Duration,
}

impl SweepReport {
    /// Sum of the per-cell run times, i.e. the single-worker cost.
    pub fn cpu(&self) -> Duration {
        self.cells.iter().map(|c| c.elapsed).sum()
    }
}

fn sweep_of(sc: &Scenario) -> Result<&Sweep> {
    sc.sweep
        .as_ref()
        .ok_or_else(|| SimError::invalid(format!("scenario `{}` has no [sweep] table", sc.name)))
}

/// Runs every cell on `workers` threads and hands each finished run to
/// `visit` on the worker that produced it.
pub fn sweep_cells<F>(sc: &Scenario, workers: usize, visit: F) -> Result<SweepReport>
where
    F: Fn(usize, &RunOutput) -> Result<()> + Sync,
{
    let sweep = sweep_of(sc)?;
    if workers == 0 {
        return Err(SimError::invalid("workers must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::invalid(format!("cannot start workers: {e}")))?;
    let coords = sweep.cells();
    let start = Instant::now();
    let cells = pool.install(|| {
        coords
            .into_par_iter()
            .enumerate()
            .map(|(index, coords)| {
                let t0 = Instant::now();
                let mut initial = sc.initial.clone();
                for (axis, &x) in sweep.axes.iter().zip(&coords) {
                    axis.coordinate.set(&mut initial, x);
                }
                let outcome = simulate_from(sc, initial)
                    .and_then(|out| visit(index, &out).map(|_| out.summary))
                    .map_err(|e| e.to_string());
                CellResult {
                    index,
                    coords,
                    outcome,
                    elapsed: t0.elapsed(),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(SweepReport {
        cells,
        wall: start.elapsed(),
    })
}

fn cell_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("cell_{index:05}.csv"))
}

fn state_header(dof: usize) -> String {
    let mut h = vec!["t".to_string()];
    h.extend((0..dof).map(|i| format!("q_{i}")));
    h.extend((0..dof).map(|i| format!("v_{i}")));
    h.join(",")
}

fn write_cell(path: &Path, out: &RunOutput, stride: usize) -> Result<()> {
    let mut w = create(path)?;
    let states = &out.trajectory.states;
    let last = states.len() - 1;
    let mut body = String::new();
    body.push_str(&state_header(states[0].dof()));
    body.push('\n');
    for (k, s) in states.iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let row: Vec<String> = std::iter::once(s.t)
            .chain(s.q.iter().copied())
            .chain(s.v.iter().copied())
            .map(num)
            .collect();
        body.push_str(&row.join(","));
        body.push('\n');
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(write_err(path))
}

/// Runs the sweep and writes `cells/`, `phase.csv` (every cell's strided
/// trajectory, tagged with its index) and `cells.csv` (one summary row per
/// cell) into `out_dir/<name>`.
pub fn run_sweep(sc: &Scenario, out_dir: &Path, workers: usize) -> Result<(PathBuf, SweepReport)> {
    let sweep = sweep_of(sc)?;
    let dir = out_dir.join(&sc.name);
    let cell_dir = dir.join("cells");
    make_dir(&cell_dir)?;
    let report = sweep_cells(sc, workers, |index, out| write_cell(&cell_path(&cell_dir, index), out, sweep.stride))?;

    let path = dir.join("phase.csv");
    let mut phase = create(&path)?;
    writeln!(phase, "cell,{}", state_header(sc.dof())).map_err(write_err(&path))?;
    for cell in &report.cells {
        if cell.outcome.is_err() {
            continue;
        }
        let cp = cell_path(&cell_dir, cell.index);
        let file = fs::File::open(&cp).map_err(|source| SimError::Read { path: cp.clone(), source })?;
        for line in BufReader::new(file).lines().skip(1) {
            let line = line.map_err(|source| SimError::Read { path: cp.clone(), source })?;
            writeln!(phase, "{},{line}", cell.index).map_err(write_err(&path))?;
        }
    }
    phase.flush().map_err(write_err(&path))?;

    let path = dir.join("cells.csv");
    let mut w = create(&path)?;
    w.write_all(cells_table(sc, sweep, &report).as_bytes())
        .and_then(|_| w.flush())
        .map_err(write_err(&path))?;
    Ok((dir, report))
}

fn cells_table(sc: &Scenario, sweep: &Sweep, report: &SweepReport) -> String {
    let dof = sc.dof();
    let mut header = vec!["cell".to_string()];
    header.extend(sweep.axes.iter().map(|a| a.coordinate.label()));
    header.extend(["goal_met".into(), "rest_since".into(), "final_t".into()]);
    header.extend((0..dof).map(|i| format!("final_q_{i}")));
    header.extend((0..dof).map(|i| format!("final_v_{i}")));
    header.extend(["events".into(), "non_converged".into(), "max_iterations".into(), "error".into()]);
    let mut out = header.join(",");
    out.push('\n');
    for c in &report.cells {
        let mut row = vec![c.index.to_string()];
        row.extend(c.coords.iter().map(|&x| num(x)));
        match &c.outcome {
            Ok(s) => {
                row.push(s.goal_met.map_or("n/a", |g| if g { "true" } else { "false" }).into());
                row.push(s.rest_since.map_or(String::new(), num));
                row.push(num(s.final_state.t));
                row.extend(s.final_state.q.iter().map(|&x| num(x)));
                row.extend(s.final_state.v.iter().map(|&x| num(x)));
                row.extend([s.events.to_string(), s.non_converged.to_string(), s.max_iterations.to_string()]);
                row.push(String::new());
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 3 + 2 * dof + 3));
                row.push(format!("\"{}\"", e.replace('"', "'")));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
