//! End-to-end checks of the binary: exit codes, schema stability, and
//! manifest-based reproducibility.

use std::path::Path;
use std::process::{Command, Output};

const FIG1: &str = r#"{
  "n": 3,
  "k": [0, 2, 0, 1, 1, 1, 0, 2, 2],
  "alpha": ["1/4", "1/2", "1/4"],
  "beta": [
    {"a": 1, "b": 2, "value": 0.3},
    {"a": 2, "b": 2, "value": 0.3},
    {"a": 2, "b": 3, "value": 0.3},
    {"a": 3, "b": 3, "value": 0.3}
  ],
  "h": [0.1, 0.1, 0.1]
}"#;

const SINGLE: &str =
    r#"{"n": 1, "k": [3], "alpha": ["1"], "beta": [{"a": 1, "b": 1, "value": 0.2}], "h": [0.1]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multibethe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn validate_fig1_golden() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "fig1.json", FIG1);
    let out = run(&["validate", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(0));
    let expected = r#"{
  "verdict": true,
  "violated_conditions": [],
  "smallest_feasible_n": 4,
  "simply_cyclic": false,
  "notes": []
}
"#;
    assert_eq!(String::from_utf8_lossy(&out.stdout), expected);
}

#[test]
fn validate_condition_ii_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "bad.json",
        r#"{"n": 2, "k": [0, 2, 1, 0], "alpha": ["1/2", "1/2"],
            "beta": [{"a": 1, "b": 2, "value": 0.5}], "h": [0.0, 0.0]}"#,
    );
    let out = run(&["validate", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(3));
    let body: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("report still printed");
    assert_eq!(body["violated_conditions"][0], "ii");
}

#[test]
fn malformed_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "broken.json", "{\"n\": 1, nonsense");
    let out = run(&["validate", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_reports_expected_values_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "single.json", SINGLE);
    let out = run(&["solve", "--spec", &spec, "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["schema_version"], 1);
    let z = body["fixed_point"]["z"][0].as_f64().unwrap();
    assert!((z - 0.16430375781217).abs() < 1e-10);
    let p = body["observables"]["bethe_pressure"].as_f64().unwrap();
    assert!((p - 0.7327431916311431).abs() < 1e-10);
    assert_eq!(body["observables"]["regime"], "subcritical");
    assert_eq!(body["manifest"]["seed"], 3);
}

#[test]
fn solve_is_reproducible_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "single.json", SINGLE);
    let scrub = |raw: &[u8]| -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_slice(raw).unwrap();
        v["manifest"]["created_unix"] = serde_json::json!(0);
        v["manifest"]["argv"] = serde_json::json!([]);
        v
    };
    let a = scrub(&run(&["solve", "--spec", &spec, "--seed", "11"]).stdout);
    let b = scrub(&run(&["solve", "--spec", &spec, "--seed", "11"]).stdout);
    assert_eq!(a, b);
}

#[test]
fn solve_bad_tolerance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "single.json", SINGLE);
    let out = run(&["solve", "--spec", &spec, "--tol", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_writes_manifest_with_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "single.json", SINGLE);
    let out_dir = dir.path().join("results");
    let out = run(&[
        "solve",
        "--spec",
        &spec,
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["outputs"][0], "solve.json");
    assert!(out_dir.join("solve.json").exists());
    let solved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("solve.json")).unwrap())
            .unwrap();
    assert_eq!(solved["manifest"]["spec_hash"], manifest["spec_hash"]);
}

#[test]
fn sweep_csv_schema_and_transition() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "zero.json",
        r#"{"n": 1, "k": [3], "alpha": ["1"], "beta": [{"a": 1, "b": 1, "value": 0.2}], "h": [0.0]}"#,
    );
    let out = run(&[
        "sweep", "--spec", &spec, "--from", "0.45", "--to", "0.65", "--points", "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# schema_version=1 beta_c=0.54930614433"));
    assert_eq!(lines.next().unwrap(), "beta,rho_m,regime,m_1,corr_1_1,pressure,S_1");
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    // S = 0 below the critical point, positive above
    assert_eq!(rows[0][6], "0");
    assert_eq!(rows[1][6], "0");
    for row in &rows[2..] {
        assert!(row[6].parse::<f64>().unwrap() > 0.05, "row {row:?}");
        assert_eq!(row[2], "supercritical");
    }
}

#[test]
fn sweep_rows_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "single.json", SINGLE);
    let base = ["sweep", "--spec", &spec, "--from", "0.1", "--to", "0.5", "--points", "7"];
    let one = run(&base);
    let mut with_threads = base.to_vec();
    with_threads.extend_from_slice(&["--threads", "3"]);
    let three = run(&with_threads);
    assert_eq!(one.stdout, three.stdout);

    let env_run = Command::new(env!("CARGO_BIN_EXE_multibethe"))
        .args(base)
        .env("MULTIBETHE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(one.stdout, env_run.stdout);
}

#[test]
fn boundary_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "single.json", SINGLE);
    let boundary = write_spec(dir.path(), "boundary.json", r#"["inf"]"#);
    let from_file = run(&["solve", "--spec", &spec, "--boundary", &boundary, "--seed", "1"]);
    let plus = run(&["solve", "--spec", &spec, "--boundary", "plus", "--seed", "1"]);
    assert_eq!(from_file.status.code(), Some(0));
    let a: serde_json::Value = serde_json::from_slice(&from_file.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&plus.stdout).unwrap();
    assert_eq!(a["fixed_point"]["z"], b["fixed_point"]["z"]);

    let short = write_spec(dir.path(), "short.json", "[1.0, 2.0]");
    let bad = run(&["solve", "--spec", &spec, "--boundary", &short]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn solve_plus_boundary_reports_spontaneous_magnetization() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "super.json",
        r#"{"n": 1, "k": [3], "alpha": ["1"], "beta": [{"a": 1, "b": 1, "value": 0.8}], "h": [0.0]}"#,
    );
    let out = run(&["solve", "--spec", &spec, "--boundary", "plus", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["observables"]["regime"], "supercritical");
    let s = body["observables"]["spontaneous"][0].as_f64().unwrap();
    assert!((s - 0.9607016978672059).abs() < 1e-8, "S = {s}");
    let z = body["fixed_point"]["z"][0].as_f64().unwrap();
    assert!((z - 1.3032921273521485).abs() < 1e-9, "z+ = {z}");
}

#[test]
fn verify_spectral_suite_passes() {
    let out = run(&["verify", "--suite", "spectral"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS] single-class critical point"));
    assert!(text.contains("verify: all 3 checks passed"));
}
