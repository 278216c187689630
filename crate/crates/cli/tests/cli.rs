//! End-to-end runs of the `purple` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn purple(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purple")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = purple(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_fit_estimate_check() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("gauss.csv");
    let model = dir.path().join("model.json");
    let checks = dir.path().join("checks.json");
    ok(&[
        "simulate", "gauss", "--n-a", "2000", "--n-b", "4000", "--c", "a=0.5,b=0.25", "--seed", "3", "--out", p(&data),
    ]);
    let header = std::fs::read_to_string(&data).unwrap();
    assert!(header.starts_with("g,s,y,x0,x1,x2,x3,x4"));

    ok(&[
        "fit", "--data", p(&data), "--method", "purple", "--lambda-grid", "0", "--splits", "2", "--seed", "1", "--out",
        p(&model),
    ]);
    let m = read_json(&model);
    assert_eq!(m["method"], "purple");
    assert_eq!(m["fits"].as_array().unwrap().len(), 2);

    let out = ok(&["estimate", "--model", p(&model), "--data", p(&data), "--pairs", "a:b,b:a", "--vs-complement", "a"]);
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    let est = rep["estimates"].as_array().unwrap();
    assert_eq!(est.len(), 3);
    let ab = est[0]["value"].as_f64().unwrap();
    let splits = |k: usize| -> Vec<f64> {
        est[k]["per_split_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    };
    for (x, y) in splits(0).iter().zip(splits(1)) {
        assert!((x * y - 1.0).abs() < 1e-9);
    }
    let truth = est[0]["true_value"].as_f64().unwrap();
    assert!((ab / truth - 1.0).abs() < 0.15, "estimate {ab} vs sampled truth {truth}");
    // two groups: the complement of a is b
    assert!((est[2]["value"].as_f64().unwrap() - ab).abs() < 1e-12);
    assert_eq!(est[0]["per_split_values"].as_array().unwrap().len(), 2);

    ok(&["check", "--model", p(&model), "--data", p(&data), "--bins", "10", "--out", p(&checks)]);
    let c = read_json(&checks);
    assert_eq!(c["n_bins"], 10);
    assert!(c["calibration_verdict"] == "pass" || c["calibration_verdict"] == "warn");
    assert_eq!(c["thresholds"]["ece_warn"], 0.05);
    assert_eq!(c["splits"][0]["calibration"]["groups"][0]["bins"].as_array().unwrap().len(), 10);
}

#[test]
fn baseline_models_estimate_but_do_not_check() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("gauss.pu");
    let model = dir.path().join("neg.json");
    ok(&["simulate", "gauss", "--n-a", "1000", "--n-b", "2000", "--seed", "4", "--out", p(&data)]);
    assert!(std::fs::read_to_string(&data).unwrap().starts_with("#sparse"));
    ok(&["fit", "--data", p(&data), "--method", "negative", "--splits", "2", "--out", p(&model)]);
    let m = read_json(&model);
    assert_eq!(m["fits"][0]["kind"], "per-group");
    let out = ok(&["estimate", "--model", p(&model), "--data", p(&data), "--pairs", "a:b"]);
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rep["estimates"][0]["value"].as_f64().unwrap() > 0.0);

    let out = purple(&["check", "--model", p(&model), "--data", p(&data), "--out", p(&dir.path().join("c.json"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn semisynth_from_generated_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let visits = dir.path().join("visits.pu");
    let symptoms = dir.path().join("symptoms.txt");
    let out = dir.path().join("semi.pu");
    ok(&["simulate", "corpus", "--rows", "3000", "--dims", "1000", "--seed", "2", "--out", p(&visits)]);
    std::fs::write(&symptoms, "# suspicious\n3\n7\n11\n").unwrap();
    ok(&[
        "simulate", "semisynth", "--visits", p(&visits), "--symptoms", p(&symptoms), "--c", "a=0.5,b=0.25", "--seed",
        "1", "--out", p(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("#sparse d=1000"));
    ok(&[
        "simulate", "semisynth", "--visits", p(&visits), "--symptoms", "common", "--pool", "20", "--pick", "5",
        "--out", p(&out),
    ]);
    let bad = purple(&["simulate", "semisynth", "--visits", p(&visits), "--symptoms", "correlated", "--out", p(&out)]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    for args in [
        vec!["benchmark", "--suite", "no-such-suite", "--out", p(&out)],
        vec!["benchmark", "--suite", "separability", "--methods", "bogus", "--out", p(&out)],
        vec!["benchmark", "--suite", "separability", "--splits", "1", "--out", p(&out)],
    ] {
        assert_eq!(purple(&args).status.code(), Some(1), "{args:?}");
    }
    let bad_c = purple(&["simulate", "gauss", "--c", "a=2,b=0.25", "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(bad_c.status.code(), Some(1));
}
