use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn stickslip(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stickslip"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run_osc_free(out: &Path) -> Output {
    let path = scenario("osc-free");
    stickslip(&["run", path.to_str().unwrap(), "--t-end", "2"], out)
}

#[test]
fn run_writes_trajectory_events_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_osc_free(tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("osc-free");
    let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,q_0,q_1,v_0,v_1,Lambda_0"), "{header}");
    assert!(header.ends_with(",converged"));
    assert_eq!(lines.count(), 2001);

    let first_row = traj.lines().nth(2).unwrap();
    let t = first_row.split(',').next().unwrap();
    let mantissa = t.split(['e', 'E']).next().unwrap().replace(['-', '.'], "");
    assert!(mantissa.len() >= 12, "{t}");

    let events = fs::read_to_string(dir.join("events.csv")).unwrap();
    assert!(events.starts_with("t,kind,impulse,pre_v_0,pre_v_1,post_v_0,post_v_1,estimator_iters"));
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("name = osc-free"));
    assert!(summary.contains("steps = 2000"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_osc_free(a.path()).status.success());
    assert!(run_osc_free(b.path()).status.success());
    for f in ["trajectory.csv", "events.csv", "summary.txt"] {
        let x = fs::read(a.path().join("osc-free").join(f)).unwrap();
        let y = fs::read(b.path().join("osc-free").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn controlled_run_logs_impulses() {
    let tmp = tempfile::tempdir().unwrap();
    let path = scenario("osc-ctrl-shoot");
    let o = stickslip(&["run", path.to_str().unwrap()], tmp.path());
    assert!(o.status.success());
    let events = fs::read_to_string(tmp.path().join("osc-ctrl-shoot/events.csv")).unwrap();
    assert_eq!(events.lines().count(), 2);
    let summary = fs::read_to_string(tmp.path().join("osc-ctrl-shoot/summary.txt")).unwrap();
    assert!(summary.contains("goal_met = true"));
}

#[test]
fn sweep_output_does_not_depend_on_workers() {
    let path = scenario("furuta-free-sweep");
    let p = path.to_str().unwrap();
    let one = tempfile::tempdir().unwrap();
    let three = tempfile::tempdir().unwrap();
    let a = stickslip(&["sweep", p, "--t-end", "1", "--workers", "1"], one.path());
    let b = stickslip(&["sweep", p, "--t-end", "1", "--workers", "3"], three.path());
    assert!(a.status.success() && b.status.success());
    for f in ["phase.csv", "cells.csv"] {
        let x = fs::read(one.path().join("furuta-free-sweep").join(f)).unwrap();
        let y = fs::read(three.path().join("furuta-free-sweep").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let cells = fs::read_to_string(one.path().join("furuta-free-sweep/cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 14);
    assert!(one.path().join("furuta-free-sweep/cells/cell_00012.csv").exists());
}

#[test]
fn invalid_scenarios_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    let text = fs::read_to_string(scenario("osc-free")).unwrap();

    fs::write(&bad, text.replace("m = 1.0", "m = -1.0")).unwrap();
    let o = stickslip(&["run", bad.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(&bad, text.replace("[run]", "[run]\nbogus = 1")).unwrap();
    assert_eq!(stickslip(&["run", bad.to_str().unwrap()], tmp.path()).status.code(), Some(1));

    fs::write(&bad, "name = ").unwrap();
    assert_eq!(stickslip(&["run", bad.to_str().unwrap()], tmp.path()).status.code(), Some(1));

    let missing = tmp.path().join("missing.toml");
    assert_eq!(stickslip(&["run", missing.to_str().unwrap()], tmp.path()).status.code(), Some(1));

    let path = scenario("osc-free");
    let o = stickslip(&["sweep", path.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));

    let o = stickslip(&["run", path.to_str().unwrap(), "--dt=-1"], tmp.path());
    assert_eq!(o.status.code(), Some(1));

    let o = stickslip(&["run", path.to_str().unwrap(), "--workers", "many"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_rejects_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let o = stickslip(&["verify", "--dt", "1e-4"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
