use std::fs;
use std::process::{Command, Output};

use tempfile::tempdir;

fn zerolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerolab"))
        .args(args)
        .output()
        .expect("spawn zerolab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn parabolic_run_prints_trajectory_csv() {
    let o = zerolab(&["simulate-parabolic", "--n", "33", "--dt", "0.01", "--t-final", "0.05", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("t,z,v_minus,v_plus,sup_norm,degenerate\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn same_seed_same_bytes() {
    let args = ["simulate-delay", "--p", "1", "--q", "0.2", "--dt", "0.01", "--t-final", "3", "--seed", "42"];
    let a = zerolab(&args);
    let b = zerolab(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = zerolab(&["simulate-delay", "--p", "1", "--q", "0.2", "--dt", "0.01", "--t-final", "3", "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn campaign_writes_per_trial_files() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("run");
    let o = zerolab(&[
        "campaign",
        "--kind",
        "parabolic",
        "--n",
        "33",
        "--dt",
        "0.01",
        "--t-final",
        "0.05",
        "--trials",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    for i in 0..3 {
        assert!(out.join(format!("trial_{i:04}.csv")).exists());
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"], 3);
    assert_eq!(summary["failures"], 0);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"t_final": 0.02}"#).unwrap();
    let o = zerolab(&[
        "simulate-parabolic",
        "--n",
        "17",
        "--dt",
        "0.01",
        "--t-final",
        "1.0",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let last = stdout(&o).lines().last().unwrap().to_string();
    assert!(last.starts_with("0.02,"), "{last}");
}

#[test]
fn check_accepts_generated_and_rejects_rising_trajectory() {
    let dir = tempdir().unwrap();
    let good = dir.path().join("good.csv");
    let o = zerolab(&["simulate-parabolic", "--n", "33", "--dt", "0.01", "--t-final", "0.1", "--seed", "9"]);
    fs::write(&good, o.stdout).unwrap();
    let c = zerolab(&["check", good.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(0));

    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        "t,z,v_minus,v_plus,sup_norm,degenerate\n0,1,1,2,1.0,0\n0.1,3,3,4,0.9,0\n",
    )
    .unwrap();
    let c = zerolab(&["check", bad.to_str().unwrap()]);
    assert_eq!(c.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn setup_errors_exit_two() {
    let o = zerolab(&["simulate-parabolic", "--n", "33", "--dt", "-0.1", "--t-final", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempdir().unwrap();
    let o = zerolab(&["check", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = zerolab(&["witness-search", "--budget", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn probe_generator_reports_heat_coefficients() {
    let o = zerolab(&["probe-generator", "--target", "heat", "--n", "65", "--stride", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,alpha,beta,gamma"));
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((f[1] - 1.0).abs() < 5e-3, "{line}");
    }
}

#[test]
fn negative_feedback_witness_search_finds_nothing_small_budget() {
    let o = zerolab(&["witness-search", "--family", "negative-delay", "--budget", "5", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["witness"].is_null());
}

#[test]
fn coefficients_accept_json_fields() {
    let o = zerolab(&[
        "probe-generator",
        "--target",
        "parabolic",
        "--a",
        r#"{"kind":"sinusoid","amp":0.5,"freq":3.141592653589793,"offset":1}"#,
        "--b",
        "0.3",
        "--c",
        "-0.2",
        "--n",
        "65",
        "--stride",
        "16",
    ]);
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let exact = 1.0 + 0.5 * (std::f64::consts::PI * f[0]).sin();
        assert!((f[1] - exact).abs() < 1e-2, "{line}");
        assert!((f[2] - 0.3).abs() < 1e-2, "{line}");
    }
    let o = zerolab(&["simulate-parabolic", "--a", "not-a-field", "--dt", "0.1", "--t-final", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
