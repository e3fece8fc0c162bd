use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fcmqem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fcmqem")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn json_out(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "{}", stderr(o));
    serde_json::from_str(&stdout(o)).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

#[test]
fn calibrate_zero_noise_prints_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = fcmqem(&["calibrate", "--noise", "zero", "--out", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("M =\n  1.000000   0.000000   0.000000   0.000000\n  0.000000   1.000000"), "{text}");
    let artifact: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(artifact["schema_version"], 1);
    assert_eq!(artifact["config"]["noise"]["preset"], "zero");
}

#[test]
fn calibrate_is_deterministic_and_reproducible_from_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for out in ["a.json", "b.json"] {
        let o = fcmqem(&["calibrate", "--noise", "paper-like", "--seed", "7", "--out", out], p);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(p.join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.json")).unwrap());
    let o = fcmqem(&["calibrate", "--config", "a.json", "--out", "c.json"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(a, std::fs::read(p.join("c.json")).unwrap());
}

#[test]
fn calibrate_rejects_single_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let o = fcmqem(&["calibrate", "--t", "1", "--out", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("more clusters than instances"), "{}", stderr(&o));
}

#[test]
fn calibrate_from_imported_records() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut records = Vec::new();
    for (b, state) in ["00", "01", "10", "11"].iter().enumerate() {
        for e in 0..5u64 {
            let mut counts = vec![10 + e; 4];
            counts[b] = 700 - 3 * (10 + e);
            records.push(serde_json::json!({"basis_state": state, "shots": 700, "counts": counts}));
        }
    }
    std::fs::write(p.join("records.json"), Value::Array(records).to_string()).unwrap();
    let o = fcmqem(&["calibrate", "--records", "records.json", "--t", "5", "--shots", "700", "--out", "c.json"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = fcmqem(&["calibrate", "--records", "records.json", "--t", "5", "--shots", "760", "--out", "c.json"], p);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(fcmqem(&["calibrate", "--set", "fcm.bogus=1"], p).status.code(), Some(2));
    assert_eq!(fcmqem(&["calibrate", "--noise", "no-such-preset"], p).status.code(), Some(2));
    assert_eq!(fcmqem(&["calibrate", "--seed", "seven"], p).status.code(), Some(2));
    std::fs::write(p.join("cfg.json"), r#"{"calibraton": {"t": 5}}"#).unwrap();
    let o = fcmqem(&["calibrate", "--config", "cfg.json"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
    assert_eq!(fcmqem(&["frobnicate"], p).status.code(), Some(2));
}

#[test]
fn seed_auto_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = fcmqem(&["calibrate", "--seed", "auto", "--noise", "zero", "--out", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let artifact: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(artifact["config"]["seed"], artifact["seed"]["master"]);
}

#[test]
fn mitigate_identity_returns_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fcmqem(&["calibrate", "--noise", "zero", "--out", "c.json"], p);
    std::fs::write(p.join("counts.json"), r#"{"register": ["Q0", "Q2"], "counts": [100, 200, 300, 160]}"#).unwrap();
    let v = json_out(&fcmqem(&["mitigate", "--calibration", "c.json", "--counts", "counts.json"], p));
    let expected = [100.0 / 760.0, 200.0 / 760.0, 300.0 / 760.0, 160.0 / 760.0];
    assert!(close(&floats(&v["normalized"]), &expected, 1e-15));
    assert_eq!(v["negativity"], 0.0);
}

#[test]
fn mitigate_reported_matrix_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("counts.json"), "[160, 670, 30, 140]").unwrap();
    let m = fixture("reported_m.json");
    let v = json_out(&fcmqem(&["mitigate", "--calibration", m.to_str().unwrap(), "--counts", "counts.json"], p));
    assert!(close(&floats(&v["normalized"]), &[0.0, 1.0, 0.0, 0.0], 1e-9), "{v}");

    let v = json_out(&fcmqem(
        &["mitigate", "--calibration", m.to_str().unwrap(), "--counts", "counts.json", "--policy", "raw-only"],
        p,
    ));
    assert!(v["normalized"].is_null());
}

#[test]
fn mitigate_dimension_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("counts.json"), "[1, 2, 3]").unwrap();
    let m = fixture("reported_m.json");
    let o = fcmqem(&["mitigate", "--calibration", m.to_str().unwrap(), "--counts", "counts.json"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));
}

#[test]
fn mitigate_singular_matrix_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("m.json"),
        r#"{"register": ["Q0"], "shape": [2, 2], "data": [0.5, 0.5, 0.5, 0.5], "provenance": {"selection_rule": "test"}}"#,
    )
    .unwrap();
    std::fs::write(p.join("counts.json"), "[3, 1]").unwrap();
    let o = fcmqem(&["mitigate", "--calibration", "m.json", "--counts", "counts.json"], p);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("singular calibration matrix"), "{}", stderr(&o));
}

#[test]
fn simulate_ideal_distributions() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // Control Q2 is the low bit: |01> flips Q0, |10> is left alone.
    let v = json_out(&fcmqem(&["simulate", "--circuit", "cnot", "--state", "01"], p));
    assert!(close(&floats(&v["ideal"]), &[0.0, 0.0, 0.0, 1.0], 1e-12));
    let v = json_out(&fcmqem(&["simulate", "--circuit", "cnot", "--state", "10"], p));
    assert!(close(&floats(&v["ideal"]), &[0.0, 0.0, 1.0, 0.0], 1e-12));
    let file = fixture("circuits/h-cnot.json");
    let v = json_out(&fcmqem(&["simulate", "--circuit", file.to_str().unwrap(), "--state", "00"], p));
    assert!(close(&floats(&v["ideal"]), &[0.5, 0.0, 0.0, 0.5], 1e-12));
    std::fs::write(p.join("empty.json"), r#"{"name": "empty", "register": ["Q0", "Q2"], "gates": []}"#).unwrap();
    let v = json_out(&fcmqem(&["simulate", "--circuit", "empty.json", "--state", "|11>"], p));
    assert!(close(&floats(&v["ideal"]), &[0.0, 0.0, 0.0, 1.0], 1e-12));
    assert!(v.get("counts").is_none());
}

#[test]
fn simulate_with_noise_samples_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = ["simulate", "--circuit", "h-cnot", "--state", "00", "--noise", "paper-like", "--shots", "500", "--seed", "3"];
    let a = json_out(&fcmqem(&args, p));
    let b = json_out(&fcmqem(&args, p));
    assert_eq!(a, b);
    let counts: u64 = a["counts"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(counts, 500);
}

#[test]
fn simulate_parse_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("bad.json"), r#"{"name": "bad", "register": ["Q0"], "gates": [{"gate": "warp", "target": "Q0"}]}"#).unwrap();
    assert_eq!(fcmqem(&["simulate", "--circuit", "bad.json", "--state", "0"], p).status.code(), Some(2));
    assert_eq!(fcmqem(&["simulate", "--circuit", "cnot", "--state", "2"], p).status.code(), Some(2));
}

#[test]
fn bench_zero_noise_prints_zero_improvements() {
    let dir = tempfile::tempdir().unwrap();
    let o = fcmqem(&["bench", "--noise", "zero", "--repetitions", "2", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 1 + 16 + 3);
    for line in &lines[1..] {
        assert!(line.contains("+0.0000 ± "), "{line}");
    }
    assert!(lines[17].starts_with("Mean") && lines[18].starts_with("Min") && lines[19].starts_with("Max"));
}

#[test]
fn bench_circuit_filter() {
    let dir = tempfile::tempdir().unwrap();
    let o = fcmqem(&["bench", "--circuits", "only:cnot", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = std::fs::read_to_string(dir.path().join("out/bench_result.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 4 * 5);
    assert!(records.lines().all(|l| l.starts_with(r#"{"circuit":"cnot""#)));
    assert_eq!(fcmqem(&["bench", "--circuits", "only:nope"], dir.path()).status.code(), Some(2));
}

#[test]
fn bench_is_byte_identical_across_jobs_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for (out, jobs) in [("j1", "1"), ("j3", "3"), ("j3b", "3")] {
        let o = fcmqem(&["bench", "--seed", "5", "--repetitions", "2", "--jobs", jobs, "--out", out], p);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let names = ["bench_result.jsonl", "bench_summary.json", "bench_fidelity.csv", "bench_table.txt", "calibration.json", "stability.json"];
    for name in names {
        let a = std::fs::read(p.join("j1").join(name)).unwrap();
        assert_eq!(a, std::fs::read(p.join("j3").join(name)).unwrap(), "{name}");
        assert_eq!(a, std::fs::read(p.join("j3b").join(name)).unwrap(), "{name}");
    }
    // The embedded config reproduces the run.
    let o = fcmqem(&["bench", "--config", "j1/bench_summary.json", "--out", "again"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in names {
        assert_eq!(std::fs::read(p.join("j1").join(name)).unwrap(), std::fs::read(p.join("again").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn bench_reuses_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fcmqem(&["calibrate", "--seed", "2", "--out", "c.json"], p);
    let o = fcmqem(&["bench", "--calibration", "c.json", "--repetitions", "1", "--out", "out"], p);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(p.join("out/bench_summary.json")).unwrap()).unwrap();
    let artifact: Value = serde_json::from_str(&std::fs::read_to_string(p.join("c.json")).unwrap()).unwrap();
    assert_eq!(summary["calibrations"][0]["selected_indices"], artifact["selected_indices"]);
    assert!(!p.join("out/calibration.json").exists());
}
