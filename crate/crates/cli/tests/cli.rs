use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pancake(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pancake"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PANCAKE_SEED")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn quadrature_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = pancake(&["quadrature", "--t", "3"], dir.path());
    assert!(out.status.success());
    let d = json(&dir.path().join("quadrature.json"));
    let pts: Vec<f64> = d["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let s3 = 3f64.sqrt();
    for (p, want) in pts.iter().zip([-s3, 0.0, s3]) {
        assert!((p - want).abs() < 1e-12);
    }
    let csv = fs::read_to_string(dir.path().join("quadrature_moments.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(dir.path().join("quadrature.manifest.json").exists());

    let one = tempfile::tempdir().unwrap();
    assert!(pancake(&["quadrature", "--t", "1"], one.path()).status.success());
    let d = json(&one.path().join("quadrature.json"));
    assert_eq!(d["points"], serde_json::json!([0.0]));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cases: Vec<Vec<&str>> = vec![
        vec!["quadrature", "--t", "0"],
        vec!["verify", "--suite", "nonsense"],
        vec!["instance", "make", "--k", "2", "--delta", "1.0", "--d", "8"],
        vec!["test", "--source", "null", "--d", "4"],
        vec!["design", "--k", "2", "--m", "lots"],
    ];
    for args in cases {
        let out = pancake(&args, p);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let suites = pancake(&["verify", "--suite", "nonsense"], p);
    assert!(String::from_utf8_lossy(&suites.stderr).contains("carbery_wright"));

    let blocker = p.join("file");
    fs::write(&blocker, "x").unwrap();
    let out = pancake(&["quadrature", "--t", "3"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn design_statuses_are_successful_exits() {
    let dir = tempfile::tempdir().unwrap();
    let found = dir.path().join("found");
    assert!(pancake(&["design", "--k", "2", "--m", "3"], &found).status.success());
    assert_eq!(json(&found.join("design.json"))["status"], "Found");

    let infeasible = dir.path().join("infeasible");
    assert!(pancake(&["design", "--k", "4", "--m", "4"], &infeasible)
        .status
        .success());
    let res = json(&infeasible.join("design.json"));
    assert_eq!(res["status"], "Infeasible");
    assert!(res["certificate"]["explanation"]
        .as_str()
        .unwrap()
        .contains("x^4 - 2x^2 - 1"));

    let max = dir.path().join("max");
    assert!(pancake(&["design", "--k", "2", "--m", "max"], &max).status.success());
    let csv = fs::read_to_string(max.join("design_max.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("2,0,3,Infeasible"));
}

#[test]
fn instance_inspect_and_sample() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let make = [
        "instance", "make", "--k", "2", "--delta", "0.9", "--d", "8", "--seed", "7",
    ];
    assert!(pancake(&make, p).status.success());
    let inst = json(&p.join("instance.json"));
    for key in ["d", "v", "centers", "weights", "delta", "seed"] {
        assert!(inst.get(key).is_some(), "missing {key}");
    }
    assert_eq!(inst["delta"], 0.9);
    assert_eq!(inst["seed"], 7);

    let path = p.join("instance.json").to_string_lossy().into_owned();
    let out = pancake(&["instance", "inspect", "--instance", &path], p);
    assert!(out.status.success());
    let report = json(&p.join("inspect.json"));
    assert_eq!(report["k"], 2);
    assert_eq!(report["k_prime"], 0);
    let gaps = report["hermite_gaps"].as_array().unwrap();
    assert!((gaps[3].as_f64().unwrap() - 0.81 * 2.0 / 24f64.sqrt()).abs() < 1e-12);

    let samples = p.join("samples");
    assert!(pancake(&["sample", "--source", &path, "--n", "100000"], &samples)
        .status
        .success());
    let bytes = fs::read(samples.join("samples.bin")).unwrap();
    let newline = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: Value = serde_json::from_slice(&bytes[..newline]).unwrap();
    assert_eq!(header["n"], 100_000);
    assert_eq!(header["d"], 8);
    assert_eq!(bytes.len() - newline - 1, 100_000 * 8 * 8);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pancake"))
        .args([
            "sample", "--source", "null", "--d", "2", "--n", "10", "--format", "csv", "--out",
        ])
        .arg(dir.path())
        .env("PANCAKE_SEED", "1234")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("sample.manifest.json"))["seed"], 1234);
}

#[test]
fn calibrated_test_detects_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(pancake(
        &[
            "instance",
            "make",
            "--k",
            "2",
            "--delta",
            "0.9",
            "--d",
            "4",
            "--direction",
            "axis:0",
            "--seed",
            "3"
        ],
        p
    )
    .status
    .success());
    assert!(pancake(
        &[
            "calibrate",
            "--d",
            "4",
            "--n",
            "4000",
            "--trials",
            "100",
            "--quantile",
            "0.99"
        ],
        p
    )
    .status
    .success());
    let inst = p.join("instance.json").to_string_lossy().into_owned();
    let cal = p.join("calibration.json").to_string_lossy().into_owned();

    let alt = p.join("alt");
    assert!(pancake(
        &["test", "--source", &inst, "--calibration", &cal, "--trials", "5"],
        &alt
    )
    .status
    .success());
    let summary = json(&alt.join("test_summary.json"));
    assert_eq!(summary["h1_rate"], 1.0);
    assert_eq!(summary["firing_orders"]["4"], 5);

    let null = p.join("null");
    assert!(pancake(
        &["test", "--source", "null", "--calibration", &cal, "--trials", "20"],
        &null
    )
    .status
    .success());
    assert!(json(&null.join("test_summary.json"))["h0_rate"].as_f64().unwrap() >= 0.95);
    let lines = fs::read_to_string(null.join("verdicts.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 20);
}

#[test]
fn verify_ratio_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = pancake(&["verify", "--suite", "ratio"], dir.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("verify_summary.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}
