use std::process::{Command, Stdio};

fn aerocmd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aerocmd"))
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = aerocmd().args(["evaluate", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn agent_without_server_exits_one() {
    let unused = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = unused.local_addr().unwrap().to_string();
    drop(unused);
    let out = aerocmd()
        .args(["agent", "--endpoint", &endpoint, "--corpus", &data("corpus.json")])
        .stdin(Stdio::null())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn expand_reproduces_shipped_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds.jsonl");
    let status = aerocmd()
        .args(["corpus", "expand", "--templates", &data("templates.json"), "--seed", "42", "--per-family", "50", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(out).unwrap(), include_str!("../data/dataset.jsonl"));
}

#[test]
fn split_build_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).display().to_string();
    let run = |args: &[&str]| {
        let out = aerocmd().args(args).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    run(&[
        "corpus", "split", "--dataset", &data("dataset.jsonl"), "--train", &p("train.jsonl"),
        "--heldout", &p("held.jsonl"), "--report", &p("split.json"),
    ]);
    run(&["corpus", "build", "--templates", &data("templates.json"), "--exclude", &p("split.json"), "--out", &p("c.json")]);
    let table = run(&[
        "evaluate", "--dataset", &p("held.jsonl"), "--corpus", &p("c.json"), "--ast-bar", "0.9", "--report", &p("r.json"),
    ]);
    assert!(table.contains("self-imposed bar 0.90: met"), "{table}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("r.json")).unwrap()).unwrap();
    assert!(report["ast_accuracy"].as_f64().unwrap() >= 0.9);
    let again = run(&[
        "evaluate", "--dataset", &p("held.jsonl"), "--corpus", &p("c.json"), "--ast-bar", "0.9", "--report", &p("r2.json"),
    ]);
    assert_eq!(table, again);
    assert_eq!(std::fs::read(p("r.json")).unwrap(), std::fs::read(p("r2.json")).unwrap());
}

#[test]
fn serve_rejects_bad_speed() {
    let out = aerocmd().args(["serve", "--sim-speed", "-3"]).output().unwrap();
    assert!(!out.status.success());
}
