use std::path::Path;
use std::process::{Command, Output};

use relax_core::{export, Scenario};

fn relaxctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaxctl"))
        .args(args)
        .output()
        .expect("relaxctl runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn show_prints_a_parseable_scenario() {
    for name in Scenario::builtin_names() {
        let out = relaxctl(&["show", name]);
        assert!(out.status.success());
        assert_eq!(Scenario::from_json(&stdout(&out)).unwrap(), Scenario::builtin(name).unwrap());
    }
    let out = relaxctl(&["show", "p9"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("p1"));
}

#[test]
fn validate_lists_every_hypothesis() {
    let out = relaxctl(&["validate", "--builtin", "p3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for name in ["H_0", "H(U)(ii)", "H(L)(iii)"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn solve_writes_csvs_that_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = relaxctl(&["solve", "--builtin", "p2", "--out", path(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("admissible = true"));
    let s = Scenario::builtin("p2").unwrap();
    let traj = export::read_trajectory(std::fs::File::open(dir.path().join("trajectory.csv")).unwrap(), s.problem.horizon)
        .unwrap();
    let control = export::read_control(std::fs::File::open(dir.path().join("control.csv")).unwrap(), s.problem.horizon)
        .unwrap();
    assert_eq!(traj.states.len(), control.grid().intervals() + 1);
    assert_eq!(control.grid().intervals(), s.numerics.grid);
}

#[test]
fn verify_round_trips_its_own_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert!(relaxctl(&["solve", "--builtin", "p2", "--out", d]).status.success());
    let traj = dir.path().join("trajectory.csv");
    let ctrl = dir.path().join("control.csv");
    let ok = relaxctl(&["verify", "--builtin", "p2", "--trajectory", path(&traj), "--control", path(&ctrl)]);
    assert!(ok.status.success(), "{}", stderr(&ok));

    // Shift one state far outside the reachable set.
    let text = std::fs::read_to_string(&traj).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let row: Vec<&str> = lines[5].split(',').collect();
    lines[5] = format!("{},{},{}", row[0], 50.0, row[2]);
    std::fs::write(&traj, lines.join("\n") + "\n").unwrap();
    let bad = relaxctl(&["verify", "--builtin", "p2", "--trajectory", path(&traj), "--control", path(&ctrl)]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("Original check failed at index"), "{}", stderr(&bad));
}

#[test]
fn report_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = relaxctl(&["report", "--builtin", "p1", "--chatter", "1,2,4", "--out", path(dir.path())]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for file in ["report.csv", "convergence.csv", "trace.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
}

#[test]
fn usage_and_io_errors_exit_one() {
    assert_eq!(relaxctl(&["relax"]).status.code(), Some(2), "clap usage errors keep clap's code");
    let out = relaxctl(&["relax", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"problem\": 3}").unwrap();
    let out = relaxctl(&["validate", "--scenario", path(&bad)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn broken_initial_state_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Scenario::builtin("p2").unwrap();
    s.problem.x0 = vec![-1.0];
    let file = dir.path().join("s.json");
    std::fs::write(&file, s.to_json()).unwrap();
    for cmd in ["solve", "relax", "validate"] {
        let out = relaxctl(&[cmd, "--scenario", path(&file), "--out", path(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(stderr(&out).contains("H_0"), "{cmd}: {}", stderr(&out));
    }
}
