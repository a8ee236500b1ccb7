mod common;

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn sweep(args: &[&str], out: &Path) -> (i32, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_sweep"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SWEEP_LOG", "error")
        .output()
        .expect("binary runs");
    (output.status.code().expect("exit code"), String::from_utf8_lossy(&output.stdout).into_owned())
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).expect("manifest written")).unwrap()
}

#[test]
fn example81_reports_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = sweep(&["example81", "--k", "1"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("a_0 = -5.0000000000000000e-1"), "{stdout}");
    assert!(stdout.contains("x_1 = 5.0000000000000000e-1"), "{stdout}");
    assert!(stdout.contains("J_1 = 2.5000000000000000e-1"), "{stdout}");
    let m = manifest(dir.path());
    assert_eq!(m["command"], "example81");
    assert_eq!(m["exit_code"], 0);
    for name in ["triple.json", "certificate.json", "residuals.json", "trajectory.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn solve_then_check_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let problem = common::worked_problem_path();
    let problem = problem.to_str().unwrap();
    for mode in ["fixed_point", "reference"] {
        let (code, stdout) = sweep(&["solve", problem, "--k", "6", "--mode", mode], dir.path());
        assert_eq!(code, 0, "{mode}: {stdout}");
        let triple = dir.path().join("triple.json");
        let cert = dir.path().join("certificate.json");
        let check_dir = dir.path().join(format!("check_{mode}"));
        let args = ["check", problem, "--triple", triple.to_str().unwrap(), "--certificate", cert.to_str().unwrap(), "--mode", mode];
        let (code, stdout) = sweep(&args, &check_dir);
        assert_eq!(code, 0, "{mode}: {stdout}");
        assert_eq!(manifest(&check_dir)["status"], "ok");
    }
}

#[test]
fn tampered_certificate_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sweep(&["example81", "--k", "3"], dir.path()).0, 0);
    let cert_path = dir.path().join("certificate.json");
    let mut cert: Value = serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();
    cert["lambda"] = Value::from(-1.0);
    std::fs::write(&cert_path, serde_json::to_string(&cert).unwrap()).unwrap();
    let problem_path = dir.path().join("problem.json");
    let spec = sweep_core::example81::problem();
    let file = sweep_core::io::ProblemFile::from_problem("example", &spec, None).unwrap();
    sweep_core::io::write_json(&problem_path, &file).unwrap();
    let check_dir = dir.path().join("check");
    let triple_path = dir.path().join("triple.json");
    let args = [
        "check",
        problem_path.to_str().unwrap(),
        "--triple",
        triple_path.to_str().unwrap(),
        "--certificate",
        cert_path.to_str().unwrap(),
    ];
    let (code, stdout) = sweep(&args, &check_dir);
    assert_eq!(code, 2, "{stdout}");
    assert_eq!(manifest(&check_dir)["status"], "check_failed");
}

#[test]
fn missing_problem_exits_with_one_and_still_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = sweep(&["solve", "/nonexistent/problem.json"], dir.path());
    assert_eq!(code, 1);
    let m = manifest(dir.path());
    assert_eq!(m["exit_code"], 1);
    assert!(m["status"].as_str().unwrap().starts_with("error"));
}

#[test]
fn bad_flag_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sweep(&["example81", "--mode", "sideways"], dir.path()).0, 1);
}

#[test]
fn outputs_are_deterministic() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let problem = common::worked_problem_path();
    for dir in [first.path(), second.path()] {
        assert_eq!(sweep(&["study", problem.to_str().unwrap(), "--ks", "4,8"], dir).0, 0);
        assert_eq!(sweep(&["approximate", problem.to_str().unwrap(), "--k", "8"], dir).0, 0);
    }
    for name in ["convergence.csv", "study.json", "triple.json", "feasibility.json", "triple.csv"] {
        let a = std::fs::read(first.path().join(name)).unwrap();
        let b = std::fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn simulate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let problem = common::worked_problem_path();
    let (code, _) = sweep(&["simulate", problem.to_str().unwrap(), "--k", "20"], dir.path());
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn mismatched_certificate_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = dir.path().join("coarse");
    let fine = dir.path().join("fine");
    assert_eq!(sweep(&["example81", "--k", "2"], &coarse).0, 0);
    assert_eq!(sweep(&["example81", "--k", "3"], &fine).0, 0);
    let problem = common::worked_problem_path();
    let triple = fine.join("triple.json");
    let cert = coarse.join("certificate.json");
    let args = ["check", problem.to_str().unwrap(), "--triple", triple.to_str().unwrap(), "--certificate", cert.to_str().unwrap()];
    let check_dir = dir.path().join("check");
    assert_eq!(sweep(&args, &check_dir).0, 1);
    assert!(manifest(&check_dir)["status"].as_str().unwrap().contains("does not match"));
}
