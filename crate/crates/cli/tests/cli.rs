use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kaonbell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kaonbell"))
        .args(args)
        .env_remove("KAONBELL_CONFIG")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const CP_CONSERVING: &str = r#"{
    "schema": 1,
    "epsilon": {"magnitude": 0.0, "phase_deg": 0.0},
    "eps_prime": {"magnitude": 0.0, "phase_deg": 0.0}
}"#;

fn column(doc: &Value, entry: usize) -> Vec<f64> {
    doc["entries"][entry]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["probability"].as_f64().unwrap())
        .collect()
}

#[test]
fn probability_columns() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CP_CONSERVING);
    let doc = json(&kaonbell(&[
        "--config",
        &config,
        "probabilities",
        "--pair",
        "2pi0:pipm",
        "kplus:k0bar",
        "sl+:2pi0",
        "--times",
        "0,0.5,1,2,5",
    ]));
    assert!(column(&doc, 0).iter().all(|p| *p == 0.0));
    assert!(column(&doc, 1).iter().all(|p| (p - 0.25).abs() < 1e-12));
    assert_eq!(column(&doc, 2)[0], 0.25);
}

#[test]
fn state_pair_is_constant_with_cp_violation() {
    let doc = json(&kaonbell(&[
        "probabilities",
        "--pair",
        "kplus:k0bar",
        "--times",
        "0,1,3",
    ]));
    assert!(column(&doc, 0).iter().all(|p| (p - 0.25).abs() < 1e-12));
}

#[test]
fn invalid_pair_is_usage_error() {
    for pair in ["sl+:k0", "foo:bar", "sl+"] {
        assert_eq!(
            kaonbell(&["probabilities", "--pair", pair]).status.code(),
            Some(2)
        );
    }
    // negative decay times are rejected too
    assert_eq!(
        kaonbell(&["probabilities", "--pair", "none:none", "--times=-1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn inequality_examples() {
    let doc = json(&kaonbell(&["--preset", "eps_sec2", "inequality", "eps"]));
    let r = &doc["entries"][0];
    assert_eq!(r["violated"], Value::Bool(true));
    assert!((r["lhs"].as_f64().unwrap() - 1.656e-3).abs() < 1e-6);
    assert!(!doc["assumption_notes"].as_array().unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CP_CONSERVING);
    let doc = json(&kaonbell(&["--config", &config, "inequality", "bgh"]));
    for k in 0..2 {
        assert_eq!(doc["entries"][k]["violated"], Value::Bool(false));
        assert_eq!(doc["entries"][k]["margin"].as_f64().unwrap(), 0.0);
    }
    assert_eq!(doc["entries"][2]["contradicted"], Value::Bool(false));

    let doc = json(&kaonbell(&["--config", &config, "inequality", "epsprime"]));
    assert_eq!(doc["entries"][0]["violated"], Value::Bool(false));

    let doc = json(&kaonbell(&[
        "inequality",
        "ch",
        "--ch-probs",
        "0.25,0,0.25,0.25,0.25,0.25",
    ]));
    assert_eq!(doc["entries"][0]["violated"], Value::Bool(true));
}

#[test]
fn inequality_usage_errors() {
    assert_eq!(kaonbell(&["inequality", "chsh"]).status.code(), Some(2));
    assert_eq!(kaonbell(&["inequality", "ch"]).status.code(), Some(2));
    assert_eq!(
        kaonbell(&["inequality", "ch", "--ch-probs", "0.1,0.2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        kaonbell(&["inequality", "ch", "--ch-probs", "2,0,0,0,0,0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn efficiency_scan_examples() {
    let doc = json(&kaonbell(&[
        "efficiency-scan",
        "--angles",
        "0.7853981633974483",
    ]));
    let eta = doc["entries"][0]["threshold_eta"].as_f64().unwrap();
    assert!((eta - 0.8284).abs() < 1e-3);

    let angles = format!(
        "{},{},{}",
        std::f64::consts::FRAC_PI_4,
        std::f64::consts::FRAC_PI_6,
        std::f64::consts::PI / 12.0
    );
    let out = kaonbell(&["efficiency-scan", "--angles", &angles, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("theta,threshold_eta"));
    let etas: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(etas.len(), 3);
    assert!(etas.windows(2).all(|w| w[1] <= w[0]));

    let doc = json(&kaonbell(&["efficiency-scan"]));
    let min = doc["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["threshold_eta"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((min - 0.667).abs() < 5e-3);

    assert_eq!(
        kaonbell(&["efficiency-scan", "--angles", ""]).status.code(),
        Some(2)
    );
    assert_eq!(
        kaonbell(&["efficiency-scan", "--angles", "1.2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn detection_build_and_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let product = dir.path().join("product.json");
    let doc = json(&kaonbell(&[
        "lhv",
        "build-detection",
        "--target",
        "product",
        "--plus1",
        "0.3,0.8",
        "--plus2",
        "0.5,0.5",
        "--eta",
        "1",
        "--model-out",
        product.to_str().unwrap(),
    ]));
    assert_eq!(doc["entries"][0]["status"], "feasible");
    assert!(product.exists());

    let loophole = dir.path().join("loophole.json");
    json(&kaonbell(&[
        "lhv",
        "build-detection",
        "--eta",
        "0.8",
        "--model-out",
        loophole.to_str().unwrap(),
    ]));
    let doc = json(&kaonbell(&[
        "lhv",
        "simulate",
        "--model",
        loophole.to_str().unwrap(),
    ]));
    let reports: Vec<&Value> = doc["entries"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["kind"] == "inequality")
        .collect();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["name"], "clauser_horne_full_ensemble");
    assert_eq!(reports[0]["violated"], Value::Bool(false));
    assert_eq!(reports[1]["name"], "clauser_horne_detected_subsample");
    assert_eq!(reports[1]["violated"], Value::Bool(true));
}

#[test]
fn infeasible_build_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("never.json");
    let doc = json(&kaonbell(&[
        "lhv",
        "build-detection",
        "--eta",
        "0.9",
        "--model-out",
        model.to_str().unwrap(),
    ]));
    assert_eq!(doc["entries"][0]["status"], "infeasible");
    assert!(!model.exists());

    let doc = json(&kaonbell(&[
        "lhv",
        "build-channel",
        "--branching",
        "sl+=0.5,sl-=0.5",
        "--bias",
        "0.1",
        "--model-out",
        model.to_str().unwrap(),
    ]));
    assert_eq!(doc["entries"][0]["status"], "infeasible");
}

#[test]
fn channel_build_zero_bias() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("channel.json");
    let doc = json(&kaonbell(&[
        "lhv",
        "build-channel",
        "--branching",
        "sl+=0.3,sl-=0.2,2pi0=0.5",
        "--model-out",
        model.to_str().unwrap(),
    ]));
    let est = &doc["entries"][1];
    assert_eq!(est["kind"], "flavor_estimates");
    assert!(
        (est["semileptonic"].as_f64().unwrap() - est["full_ensemble"].as_f64().unwrap()).abs()
            < 1e-12
    );

    let doc = json(&kaonbell(&[
        "lhv",
        "simulate",
        "--model",
        model.to_str().unwrap(),
    ]));
    assert!(doc["entries"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["kind"] == "flavor_estimates"));
}

#[test]
fn malformed_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"lambdas": ["a"], "weights": [0.5]}"#).unwrap();
    assert_eq!(
        kaonbell(&["lhv", "simulate", "--model", bad.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        kaonbell(&["lhv", "simulate", "--model", "/no/such/model.json"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        kaonbell(&["--config", "/no/such/config.json", "report"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn config_strictness_and_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{"schema": 1, "unknown": true}"#);
    assert_eq!(
        kaonbell(&["--config", &bad, "report"]).status.code(),
        Some(2)
    );
    let bad = write_config(dir.path(), r#"{"schema": 1, "mc": {"n": 0, "seed": 1}}"#);
    assert_eq!(
        kaonbell(&["--config", &bad, "report"]).status.code(),
        Some(2)
    );

    let config = write_config(dir.path(), CP_CONSERVING);
    let out = Command::new(env!("CARGO_BIN_EXE_kaonbell"))
        .args(["inequality", "eps"])
        .env("KAONBELL_CONFIG", &config)
        .output()
        .unwrap();
    let doc = json(&out);
    assert_eq!(doc["entries"][0]["lhs"].as_f64().unwrap(), 0.0);
}

#[test]
fn reproducible_flag_controls_timestamp() {
    let stamped = json(&kaonbell(&["inequality", "eps"]));
    assert!(stamped["generated_at"].is_string());
    let a = kaonbell(&["--reproducible", "inequality", "eps"]);
    let b = kaonbell(&["--reproducible", "inequality", "eps"]);
    assert!(json(&a).get("generated_at").is_none());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = kaonbell(&["--format", "csv", "--out", path.to_str().unwrap(), "report"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("entry,kind,name,field,value\n"));
    assert!(!text.contains('\r'));
}
