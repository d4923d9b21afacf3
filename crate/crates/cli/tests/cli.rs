use std::path::Path;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concentra"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn malformed_csv_reports_row_and_column() {
    let out = run(&["risk", "--scenarios", &fixture("bad.csv"), "--p", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3, column 2"), "{err}");
}

#[test]
fn level_outside_unit_interval_is_an_input_error() {
    let out = run(&["risk", "--scenarios", &fixture("uniform10.csv"), "--p", "1.2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["collapse", "--dist", &fixture("dist.csv"), "--p", "0.5", "--eps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"version": 1, "p": 0.8, "measure": "es"}"#).unwrap();
    let cfg = cfg.display().to_string();
    let out = run(&["risk", "--scenarios", &fixture("uniform10.csv"), "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["total"]["es"], 9.5);
    assert_eq!(v["measure"]["value"], 9.5);
    assert_eq!(v["equal_weights_assumed"], true);

    let out = run(&["risk", "--scenarios", &fixture("uniform10.csv"), "--config", &cfg, "--p", "0.75"]);
    assert_eq!(json(&out)["total"]["es"], 9.2);
}

#[test]
fn unsupported_config_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"version": 2, "p": 0.8}"#).unwrap();
    let out = run(&[
        "risk",
        "--scenarios",
        &fixture("uniform10.csv"),
        "--config",
        &cfg.display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 2"));
}

#[test]
fn thread_setting_must_be_positive() {
    let out = Command::new(env!("CARGO_BIN_EXE_concentra"))
        .args(["risk", "--scenarios", &fixture("uniform10.csv"), "--p", "0.5"])
        .env("CONCENTRA_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn constant_column_gives_constant_measures() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("c.csv");
    std::fs::write(&csv, "X\n4\n4\n4\n").unwrap();
    let out = run(&["risk", "--scenarios", &csv.display().to_string(), "--p", "0.3"]);
    let v = json(&out);
    for key in ["var", "es", "lower_es", "mean"] {
        assert_eq!(v["total"][key], 4.0);
    }
}

#[test]
fn densified_copula_feeds_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let dense = dir.path().join("dense.json").display().to_string();
    let out = run(&["copula", "densify", "--copula", &fixture("interior8.json"), "--copula-out", &dense]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["b_region_filled"], true);
    let out = run(&["copula", "simulate", "--copula", &dense, "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "diversifiable");
}

#[test]
fn check_dp_at_a_level_sets_the_exit_code() {
    let yes = run(&["copula", "check-dp", "--copula", &fixture("block8.json"), "--p", "0.5"]);
    assert_eq!(yes.status.code(), Some(0));
    let no = run(&["copula", "check-dp", "--copula", &fixture("interior8.json"), "--p", "0.5"]);
    assert_eq!(no.status.code(), Some(1));
    assert_eq!(json(&no)["levels"][0]["in_dp"], false);
}

#[test]
fn single_asset_frontier_is_one_point_repeated() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let status = run(&[
        "frontier",
        "--scenarios",
        &fixture("uniform10.csv"),
        "--p",
        "0.8",
        "--n-points",
        "3",
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(status.status.code(), Some(0));
    let text = std::fs::read_to_string(out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "target,es,mean,w_1");
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| *r == "-5.5,9.5,-5.5,1"));
}
