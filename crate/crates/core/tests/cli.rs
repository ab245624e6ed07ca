use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cea-fim"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn generate_then_run_then_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("spec.json"),
        r#"{"group_sizes": [60, 30], "prob_matrix": [[0.1, 0.01], [0.01, 0.1]], "seed": 2}"#,
    )
    .unwrap();
    let out = cli(d, &["generate", "spec.json", "net/toy"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(d.join("net/toy.groups")).unwrap().lines().count(), 90);

    fs::write(
        d.join("config.json"),
        r#"{"network": {"kind": "files", "edges": "net/toy.edges", "groups": "net/toy.groups"},
            "k": 5, "g_max": 10, "p": 0.05, "delta": 100, "repetitions": 2, "lambdas": [0.0, 1.0]}"#,
    )
    .unwrap();
    let out = cli(d, &["run", "config.json", "--out", "res", "--split-timings"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(d.join("res/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);

    let out = cli(d, &["sweep-lambda", "config.json", "--out", "sweep", "--delta", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(d.join("sweep/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("sweep/sweep.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["delta"], 50);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cli(d, &["run", "missing.json"]).status.code(), Some(2));

    fs::write(d.join("bad.json"), r#"{"network": {"kind": "karate"}, "pop": 3, "repetitions": 0}"#).unwrap();
    let out = cli(d, &["run", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("pop") && err.contains("repetitions"), "{err}");

    fs::write(d.join("big.json"), r#"{"network": {"kind": "karate"}, "k": 50}"#).unwrap();
    assert_eq!(cli(d, &["run", "big.json"]).status.code(), Some(1));

    assert_eq!(cli(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(d, &["--help"]).status.code(), Some(0));

    let out = Command::new(env!("CARGO_BIN_EXE_cea-fim"))
        .current_dir(d)
        .env("FIM_THREADS", "zero")
        .args(["run", "big.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
