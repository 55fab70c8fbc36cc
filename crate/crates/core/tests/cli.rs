use std::fs;
use std::path::Path;
use std::process::Command;

const BRIDGE: &str = env!("CARGO_BIN_EXE_bridge");

const SCENARIO: &str = r#"{"name":"cli","rateHz":10,"seed":7,"segments":[
    {"intent":"neutral","durationSeconds":3,"flipProbability":0.15,"powerMean":0.1},
    {"intent":"task","durationSeconds":3,"flipProbability":0.15,"powerMean":0.8},
    {"intent":"neutral","durationSeconds":3,"flipProbability":0.15,"powerMean":0.1}]}"#;

fn bridge(args: &[&str], dir: &Path) -> std::process::Output {
    let out = Command::new(BRIDGE).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "bridge {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn sweep_writes_ten_rows() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.json"), SCENARIO).unwrap();
    bridge(&["sweep", "--scenario", "s.json", "--out", "m.csv"], dir.path());
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.starts_with("threshold,falseActivations,missedSegments,meanLatencySeconds\n"));
}

#[test]
fn run_writes_dispatch_log_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.json"), SCENARIO).unwrap();
    bridge(&["run", "--scenario", "s.json", "--profile", "alex", "--threshold", "6"], dir.path());
    let log = fs::read_to_string(dir.path().join("dispatch.tsv")).unwrap();
    assert!(!log.is_empty());
    for line in log.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3, "{line}");
        cols[0].parse::<f64>().unwrap();
        assert_eq!(cols[1], "Space");
        assert_eq!(cols[2], "recorded");
    }
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    assert!(metrics.lines().nth(1).unwrap().starts_with("6,"));
}

#[test]
fn run_rejects_bad_threshold() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.json"), SCENARIO).unwrap();
    let out = Command::new(BRIDGE)
        .args(["run", "--scenario", "s.json", "--profile", "alex", "--threshold", "0"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("threshold"));
}
