//! End-to-end checks of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_randsplit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_lists_subcommands() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for sub in [
        "lyapunov",
        "certify",
        "shear-check",
        "convergence",
        "ergodic-check",
        "simulate",
    ] {
        assert!(text.contains(sub), "missing subcommand {sub} in help");
    }
}

#[test]
fn certify_lorenz_exits_zero_on_pass() {
    let o = run(&["certify", "--model", "lorenz", "--n", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("pass = true"));
}

#[test]
fn certify_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "certify", "--model", "euler", "--N", "3", "--beta", "0.01", "--out", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json = std::fs::read_to_string(Path::new(out).join("certify_euler.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["rank"]["rank"], 92);
    assert_eq!(v["pass"], true);
    assert!(Path::new(out).join("manifest.txt").exists());
}

#[test]
fn unknown_model_is_a_usage_error() {
    let o = run(&["certify", "--model", "stokes"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shear_check_passes() {
    let o = run(&["shear-check"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("pass = true"));
}

#[test]
fn lyapunov_outputs_are_byte_identical_across_reruns() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "lyapunov".to_string(),
            "--model".into(),
            "lorenz".into(),
            "--n".into(),
            "4".into(),
            "--steps".into(),
            "20000".into(),
            "--seeds".into(),
            "2".into(),
            "--out".into(),
            out.to_string(),
        ]
    };
    let o1 = bin().args(args(d1.path().to_str().unwrap())).output().unwrap();
    let o2 = bin().args(args(d2.path().to_str().unwrap())).output().unwrap();
    assert!(o1.status.success() && o2.status.success());
    let r1 = std::fs::read(d1.path().join("results.csv")).unwrap();
    let r2 = std::fs::read(d2.path().join("results.csv")).unwrap();
    assert_eq!(r1, r2, "rerun outputs differ");
    let m1 = std::fs::read(d1.path().join("manifest.txt")).unwrap();
    let m2 = std::fs::read(d2.path().join("manifest.txt")).unwrap();
    assert_eq!(m1, m2);
    // Results carry a schema line, a header and full-precision rows.
    let text = String::from_utf8(r1).unwrap();
    assert!(text.starts_with("# schema = 1\n"));
    assert!(text.lines().count() == 4);
    assert!(text.contains("lambda_1"));
    assert!(text.contains("lambda_time_1"));
    assert!(text.contains('e'), "floats not in scientific notation");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "model = lorenz\nn = 8\nradius = 2.0  # comment\n").unwrap();
    // Config alone.
    let o = run(&["certify", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("n=8"));
    // Flag wins over config.
    let o = run(&["certify", "--config", cfg.to_str().unwrap(), "--n", "6"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("n=6"));
}

#[test]
fn malformed_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "model lorenz\n").unwrap();
    let o = run(&["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("key = value"));
}

#[test]
fn simulate_writes_trace_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "simulate", "--model", "lorenz", "--n", "4", "--steps", "5000", "--frame", "2", "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = std::fs::read_to_string(Path::new(out).join("results.csv")).unwrap();
    assert!(results.starts_with("# schema = 1\nseed,run_id,drift_1,x_1"));
    let manifest = std::fs::read_to_string(Path::new(out).join("manifest.txt")).unwrap();
    let id = manifest
        .lines()
        .find_map(|l| l.strip_prefix("run = "))
        .expect("run id in manifest");
    let trace = std::fs::read_to_string(Path::new(out).join(format!("trace_{id}.csv"))).unwrap();
    assert!(trace.starts_with("# schema = 1\ncycle,lambda_1,lambda_2"));
    assert!(trace.lines().count() > 100);
}

#[test]
fn ergodic_check_requires_the_lorenz_model() {
    let o = run(&["ergodic-check", "--model", "euler", "--steps", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convergence_reports_fitted_order() {
    let o = run(&["convergence", "--n", "4", "--h-grid", "0.5,0.25,0.125"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("fitted order"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.cfg");
    std::fs::write(&cfg, "modle = lorenz\n").unwrap();
    let o = run(&["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn short_h_grid_is_rejected() {
    let o = run(&["convergence", "--n", "4", "--h-grid", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_steps_are_rejected() {
    let o = run(&["simulate", "--model", "lorenz", "--steps", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn too_few_cycles_for_batches_are_rejected() {
    let o = run(&["lyapunov", "--model", "lorenz", "--n", "4", "--steps", "40", "--burn-in", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("batches"));
}
