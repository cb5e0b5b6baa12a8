//! Black-box behavior of the `fracsde` binary: exit codes, validation
//! messages, artifact layout and the stdout table modes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fracsde")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fracsde-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_config(dir: &Path, config: &str) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(bin())
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .expect("binary runs")
}

#[test]
fn selfcheck_exits_zero() {
    let out = Command::new(bin()).arg("selfcheck").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("gamma_argmin"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn out_of_domain_beta_exits_one_with_field_message() {
    let dir = scratch("beta");
    let out = run_config(
        &dir,
        r#"{"kind":"strong","grid":{"horizon":1.0,"steps":16},"mc":{"replicas":8,"seed":1},
            "beta":0.4,"deltas":[0.1],"p":2.0}"#,
    );
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("beta"), "stderr: {msg}");
    assert!(msg.contains("(1/2, 1]"), "stderr: {msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = scratch("unknown");
    let out = run_config(
        &dir,
        r#"{"kind":"strong","grid":{"horizon":1.0,"steps":16},"mc":{"replicas":8,"seed":1},
            "beta":0.9,"deltas":[0.1],"p":2.0,"frobnicate":1}"#,
    );
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("unknown field"), "stderr: {msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_required_field_names_it() {
    let dir = scratch("missing");
    let out = run_config(
        &dir,
        r#"{"kind":"strong","grid":{"horizon":1.0,"steps":16},"mc":{"replicas":8,"seed":1},
            "deltas":[0.1],"p":2.0}"#,
    );
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("beta: required"), "stderr: {msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn divergent_run_exits_two() {
    // positive feedback drift from an astronomically large initial value
    // overflows the recursion
    let dir = scratch("diverge");
    let out = run_config(
        &dir,
        r#"{"kind":"solve","model":{"preset":"linear","drift_slope":2.0,"diff_const":0.0,"x0":1e308},
            "grid":{"horizon":1.0,"steps":16},"mc":{"replicas":1,"seed":1},"order":0.9}"#,
    );
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("diverged"), "stderr: {msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn solve_writes_trajectory_and_manifest_last() {
    let dir = scratch("solve");
    let out = run_config(
        &dir,
        r#"{"kind":"solve","model":{"preset":"additive-noise","b0":1.0,"sigma0":1.0},
            "grid":{"horizon":1.0,"steps":32},"mc":{"replicas":4,"seed":7},
            "order":0.8,"replica":2,"with_variation":true}"#,
    );
    assert!(out.status.success());
    let body = std::fs::read_to_string(dir.join("out/trajectory.csv")).unwrap();
    assert!(body.starts_with("t,X,Y\n"));
    assert_eq!(body.lines().count(), 34); // header + 33 nodes
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["artifacts"][0], "trajectory.csv");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn weak_derivative_kind_reports_summary() {
    let dir = scratch("wd");
    let out = run_config(
        &dir,
        r#"{"kind":"weak-derivative","model":{"preset":"deterministic-drift"},
            "grid":{"horizon":1.0,"steps":64},"mc":{"replicas":1,"seed":7},
            "beta":0.9,"deltas":[0.08,0.04,0.02],"g":{"preset":"identity"},"t":1.0}"#,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["contracting"], true);
    assert!(summary["extrapolated"].is_number());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn non_contracting_derivative_exits_three() {
    // a near-step sigmoid flips across the deterministic means reached at
    // β ± δ, so the coarse difference quotients scale like 1/δ and the
    // two-level extrapolation cannot contract: an honest inconclusive run
    let dir = scratch("inc");
    let out = run_config(
        &dir,
        r#"{"kind":"weak-derivative","model":{"preset":"deterministic-drift"},
            "grid":{"horizon":1.0,"steps":64},"mc":{"replicas":1,"seed":7},
            "beta":0.9,"deltas":[0.08,0.04],
            "g":{"preset":"sigmoid","center":1.03,"scale":0.0001},"t":1.0}"#,
    );
    assert_eq!(out.status.code(), Some(3));
    // artifacts are still written, flagged as non-contracting
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["contracting"], false);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malliavin_kind_writes_triples() {
    let dir = scratch("mall");
    let out = run_config(
        &dir,
        r#"{"kind":"malliavin","model":{"preset":"additive-noise","sigma0":1.0},
            "grid":{"horizon":1.0,"steps":16},"mc":{"replicas":2,"seed":3},
            "order":0.75,"gamma":2.0}"#,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let body = std::fs::read_to_string(dir.join("out/dgrid.csv")).unwrap();
    assert!(body.starts_with("theta,t,D\n"));
    // lower-triangular strictly below the diagonal: 16·17/2 rows
    assert_eq!(body.lines().count(), 1 + 136);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/summary.json")).unwrap())
            .unwrap();
    assert!(summary["inverse_moment"].is_number());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn gronwall_subcommand_prints_csv() {
    let out = Command::new(bin())
        .args([
            "gronwall",
            "--a",
            "0.5",
            "--eta",
            "0.7",
            "--horizon",
            "1.0",
            "--steps",
            "8",
            "--omega",
            "linear:0.5",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,omega,explicit,monotone,henry"));
    assert_eq!(lines.count(), 9);
}

#[test]
fn gronwall_subcommand_rejects_bad_eta() {
    let out = Command::new(bin())
        .args(["gronwall", "--a", "0.5", "--eta", "1.5", "--horizon", "1.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_override_changes_output() {
    let dir = scratch("seed");
    let config = r#"{"kind":"strong","grid":{"horizon":1.0,"steps":32},"mc":{"replicas":200,"seed":1},
        "beta":0.9,"deltas":[0.125,0.0625,0.03125],"p":2.0}"#;
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    for (out_name, seed) in [("a", "1"), ("b", "2")] {
        let status = Command::new(bin())
            .arg("run")
            .arg(&path)
            .arg("--out")
            .arg(dir.join(out_name))
            .arg("--seed")
            .arg(seed)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(dir.join("a/curve.csv")).unwrap();
    let b = std::fs::read(dir.join("b/curve.csv")).unwrap();
    assert_ne!(a, b, "different seeds must change the estimates");
    std::fs::remove_dir_all(&dir).ok();
}
