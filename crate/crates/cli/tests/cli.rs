use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qaoa-vrp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_str(&stdout(out)).unwrap()
}

#[test]
fn build_writes_both_models() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, n, j) in [
        ("vrp-4-2", 12, 24),
        ("vrp-5-2", 20, 60),
        ("vrp-5-3", 20, 60),
    ] {
        let out = run(&["build", "--instance", name, "--out", name], tmp.path());
        assert!(out.status.success());
        let text = stdout(&out);
        assert!(text.contains(&format!("N = {n}\n")), "{text}");
        assert!(text.contains(&format!("J terms = {j}\n")), "{text}");
        let qubo: Value = serde_json::from_str(
            &std::fs::read_to_string(tmp.path().join(name).join("qubo.json")).unwrap(),
        )
        .unwrap();
        let ising: Value = serde_json::from_str(
            &std::fs::read_to_string(tmp.path().join(name).join("ising.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(qubo["num_vars"], n);
        assert_eq!(ising["couplings"].as_array().unwrap().len(), j);
    }
    let out = run(
        &["build", "--instance", "vrp-4-2", "-A", "1000"],
        tmp.path(),
    );
    assert!(stdout(&out).contains("A = 1000\n"));
    assert!(tmp.path().join("qubo.json").exists());
}

#[test]
fn oracle_reports_the_subtour_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let report = json(&run(
        &["oracle", "--instance", "vrp-5-2", "--json"],
        tmp.path(),
    ));
    let o = &report["oracle"];
    assert!((o["ground_state"]["cost"].as_f64().unwrap() - 128.545).abs() <= 1e-3 + 1e-9);
    assert!((o["route_optimal"]["cost"].as_f64().unwrap() - 138.511).abs() <= 1e-3 + 1e-9);
    assert_eq!(o["ground_state_has_subtour"], true);
    assert!(o["gap"].as_f64().unwrap() > 9.0);

    let text = stdout(&run(&["oracle", "--instance", "vrp-4-2"], tmp.path()));
    assert!(
        text.contains("ground state: 124.870 at {779, 2125}"),
        "{text}"
    );
    let text = stdout(&run(&["oracle", "--instance", "vrp-5-3"], tmp.path()));
    assert!(
        text.contains("ground state: 30.530 at {69963, 74014}"),
        "{text}"
    );
}

#[test]
fn zero_budget_solve_reports_the_uniform_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "solve",
            "--instance",
            "vrp-4-2",
            "-p",
            "1",
            "--budget",
            "0",
            "--shots",
            "0",
            "--json",
            "--out",
            "run",
        ],
        tmp.path(),
    );
    let report = json(&out);
    let q = &report["qaoa"];
    let (e, mean) = (
        q["energy"].as_f64().unwrap(),
        q["diagonal_mean"].as_f64().unwrap(),
    );
    assert!((e - mean).abs() < 1e-9 * mean);
    let top = q["top"].as_array().unwrap();
    assert_eq!(top.len(), 12);
    let total: f64 = top.iter().map(|e| e["probability"].as_f64().unwrap()).sum();
    assert!(total <= 1.0 + 1e-9);

    let histogram = std::fs::read_to_string(tmp.path().join("run/histogram.tsv")).unwrap();
    let mut lines = histogram.lines();
    assert_eq!(
        lines.next(),
        Some("index\tbitstring\tprobability\tcost\tclass")
    );
    assert_eq!(lines.count(), 12);
    for f in ["report.json", "trace.tsv", "config.json"] {
        assert!(tmp.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn saved_config_reproduces_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let first = run(
        &[
            "solve",
            "--instance",
            "vrp-4-2",
            "-p",
            "2",
            "--budget",
            "40",
            "--starts",
            "2",
            "--seed",
            "9",
            "--shots",
            "500",
            "--out",
            "a",
        ],
        tmp.path(),
    );
    assert!(first.status.success());
    let again = run(
        &["solve", "--config", "a/config.json", "--json"],
        tmp.path(),
    );
    assert!(again.status.success());
    let saved = std::fs::read_to_string(tmp.path().join("a/report.json")).unwrap();
    assert_eq!(stdout(&again), saved);
}

#[test]
fn config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("c.json"),
        r#"{"depth": 2, "budget": 0, "shots": 0}"#,
    )
    .unwrap();
    let report = json(&run(
        &[
            "solve",
            "--instance",
            "vrp-4-2",
            "-p",
            "5",
            "--budget",
            "100",
            "--config",
            "c.json",
            "--json",
            "--out",
            "o",
        ],
        tmp.path(),
    ));
    assert_eq!(report["qaoa"]["depth"], 2);
    assert_eq!(report["qaoa"]["evaluations"], 0);

    std::fs::write(tmp.path().join("bad.json"), r#"{"depht": 2}"#).unwrap();
    let out = run(&["solve", "--config", "bad.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["oracle", "--instance", "vrp-9-9"], tmp.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["reproduce", "exp4"], tmp.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["solve", "--bogus"], tmp.path()).status.code(),
        Some(2)
    );

    std::fs::write(
        tmp.path().join("negative.json"),
        r#"{"n": 3, "k": 1, "weights": [[0, 1, 2], [1, 0, -3], [2, 3, 0]]}"#,
    )
    .unwrap();
    let out = run(&["build", "--instance", "negative.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    // Six nodes need 30 qubits, beyond the exhaustive and simulator guards.
    let weights: Vec<Vec<f64>> = (0..6)
        .map(|i| {
            (0..6)
                .map(|j| if i == j { 0.0 } else { 1.0 + (i + j) as f64 })
                .collect()
        })
        .collect();
    let doc = serde_json::json!({"n": 6, "k": 2, "weights": weights});
    std::fs::write(tmp.path().join("six.json"), doc.to_string()).unwrap();
    assert!(run(&["build", "--instance", "six.json"], tmp.path())
        .status
        .success());
    assert_eq!(
        run(&["oracle", "--instance", "six.json"], tmp.path())
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        run(&["solve", "--instance", "six.json"], tmp.path())
            .status
            .code(),
        Some(3)
    );
}
