//! End-to-end checks of the command-line harness: exit codes, artifact
//! schemas, manifest round-trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_netflow-waves")
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(name)
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nw-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary spawns")
}

fn csv_column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("column {name} missing from {header:?}"));
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn run_linear_preset_conserves_hamiltonian() {
    let out_dir = tmp_dir("run-linear");
    let out = run(&[
        "run",
        "--scenario",
        preset("linear.toml").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let ledger = std::fs::read_to_string(out_dir.join("ledger.csv")).unwrap();
    let h = csv_column(&ledger, "H");
    let h0 = h[0];
    let drift = h
        .iter()
        .map(|v| (v - h0).abs() / h0)
        .fold(0.0f64, f64::max);
    assert!(drift <= 1e-6, "H drift {drift}");

    // trajectory columns match the resolved m = 32
    let traj = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let header = traj.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 2 * 32);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["termination"]["kind"], "completed");
    std::fs::remove_dir_all(&out_dir).unwrap();
}

#[test]
fn manifest_round_trip_reproduces_the_run() {
    let out_a = tmp_dir("round-a");
    let out = run(&[
        "run",
        "--scenario",
        preset("cubic.toml").to_str().unwrap(),
        "--t-final",
        "0.2",
        "--out-dir",
        out_a.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_a.join("manifest.json")).unwrap())
            .unwrap();
    let resolved = manifest["resolved_scenario_toml"].as_str().unwrap();
    let rescued = out_a.join("resolved.toml");
    std::fs::write(&rescued, resolved).unwrap();

    let out_b = tmp_dir("round-b");
    let out2 = run(&[
        "run",
        "--scenario",
        rescued.to_str().unwrap(),
        "--out-dir",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(out2.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out2.stderr));
    let a = std::fs::read(out_a.join("trajectory.csv")).unwrap();
    let b = std::fs::read(out_b.join("trajectory.csv")).unwrap();
    assert_eq!(a, b, "round-tripped run must be byte-identical");
    std::fs::remove_dir_all(&out_a).unwrap();
    std::fs::remove_dir_all(&out_b).unwrap();
}

#[test]
fn bounds_on_cubic_preset_passes() {
    let out_dir = tmp_dir("bounds");
    let out = run(&[
        "bounds",
        "--scenario",
        preset("cubic-bounds.toml").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("bounds_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["bounds"]["all_passed"], true);
    for check in report["bounds"]["checks"].as_array().unwrap() {
        if check["skipped"] == false {
            assert!(
                check["worst_margin"].as_f64().unwrap() >= -1e-9,
                "check {} margin {}",
                check["name"],
                check["worst_margin"]
            );
        }
    }
    std::fs::remove_dir_all(&out_dir).unwrap();
}

#[test]
fn bounds_on_zero_source_preset_includes_conservation() {
    let out_dir = tmp_dir("bounds-zero-src");
    let out = run(&[
        "bounds",
        "--scenario",
        preset("cubic.toml").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("bounds_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["conservation"]["passed"], true);
    assert!(report["conservation"]["drift"].as_f64().unwrap() <= 1e-6);
    std::fs::remove_dir_all(&out_dir).unwrap();
}

#[test]
fn check_reports_hypotheses() {
    let out_dir = tmp_dir("check");
    let out = run(&[
        "check",
        "--scenario",
        preset("cubic-bounds.toml").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("conditions.json")).unwrap())
            .unwrap();
    assert_eq!(json["growth"]["satisfied"], true);
    assert_eq!(json["lipschitz"]["satisfied"], true);

    // the linear model fails the p > 2 growth condition: exit 2
    let out2 = run(&[
        "check",
        "--scenario",
        preset("linear.toml").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out2.status.code(), Some(2));
    std::fs::remove_dir_all(&out_dir).unwrap();
}

#[test]
fn blowup_preset_needs_force_and_exits_3() {
    let out_dir = tmp_dir("blowup");
    let unforced = run(&[
        "run",
        "--scenario",
        preset("blowup.toml").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(unforced.status.code(), Some(1), "construction must reject");

    let forced = run(&[
        "run",
        "--scenario",
        preset("blowup.toml").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--force",
    ]);
    assert_eq!(
        forced.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&forced.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    let term = &manifest["termination"];
    assert!(
        term["kind"] == "blow-up" || term["kind"] == "step-failure",
        "termination {term}"
    );
    assert!(term["t"].as_f64().unwrap() > 0.0);
    std::fs::remove_dir_all(&out_dir).unwrap();
}

#[test]
fn converge_writes_table() {
    let out_dir = tmp_dir("converge");
    let out = run(&[
        "converge",
        "--scenario",
        preset("cubic.toml").to_str().unwrap(),
        "--t-final",
        "0.25",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("study,"));
    assert!(csv.lines().count() >= 4);
    std::fs::remove_dir_all(&out_dir).unwrap();
}

#[test]
fn usage_errors_exit_1() {
    let out = run(&["run", "--scenario", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let out2 = run(&["frobnicate"]);
    assert_eq!(out2.status.code(), Some(1));
}
