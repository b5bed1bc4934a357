use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn resform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resform")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is json")
}

/// A short, attack-free copy of a bundled scenario.
fn write_short(dir: &Path, name: &str, duration: f64) -> String {
    let out = resform(&["list-scenarios", "--show", name]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut kept = Vec::new();
    let mut skipping = false;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("[[attacks]]") {
            skipping = true;
            continue;
        }
        if trimmed.starts_with('[') {
            skipping = false;
        }
        if skipping
            || trimmed.starts_with("duration")
            || trimmed.starts_with("attack_time")
            || trimmed.starts_with("window_end")
        {
            continue;
        }
        kept.push(line.to_string());
    }
    let body = kept.join("\n");
    let split = body.find("\n[").unwrap();
    let text = format!("{}\nduration = {duration}\n{}", &body[..split], &body[split..]);
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn validate_reports_shape() {
    let out = resform(&["validate", "--scenario", "planar_nominal"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["agents"], 6);
    assert_eq!(v["dimension"], 2);
    assert_eq!(v["steps"], 6000);
}

#[test]
fn invalid_config_exits_two_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "dimension = 2\n").unwrap();
    let out = resform(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let e = stderr_json(&out);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("duration"));
}

#[test]
fn missing_file_exits_four() {
    let out = resform(&["validate", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");
}

#[test]
fn unknown_scenario_is_config_error() {
    let out = resform(&["validate", "--scenario", "nope"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr_json(&out)["error"].is_object());
}

#[test]
fn run_then_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_short(dir.path(), "planar_nominal", 3.0);
    let out_dir = dir.path().join("out");
    let out = resform(&["run", "--config", &config, "--out", out_dir.to_str().unwrap(), "--reference"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["files"].as_array().unwrap().len(), 3);
    let csv = out_dir.join("planar_nominal.csv");
    let reference = out_dir.join("planar_nominal.reference.csv");
    assert!(csv.exists() && reference.exists());
    assert!(out_dir.join("planar_nominal.summary.json").exists());

    let metrics_dir = dir.path().join("m");
    let args = [
        "metrics",
        "--csv",
        csv.to_str().unwrap(),
        "--reference",
        reference.to_str().unwrap(),
        "--attack-time",
        "1",
        "--out",
        metrics_dir.to_str().unwrap(),
    ];
    let first = resform(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let m = stdout_json(&first);
    assert_eq!(m["modified_restoration"].as_f64().unwrap(), 0.0);
    let bytes = std::fs::read(metrics_dir.join("metrics.json")).unwrap();
    let second = resform(&args);
    assert!(second.status.success());
    assert_eq!(bytes, std::fs::read(metrics_dir.join("metrics.json")).unwrap());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn sweep_writes_one_entry_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_short(dir.path(), "planar_nominal", 2.0);
    let sweep = dir.path().join("gains.toml");
    std::fs::write(&sweep, "[[runs]]\n\"gains.kappa_g\" = 1.0\n\n[[runs]]\n\"gains.kappa_g\" = 3.0\n").unwrap();
    let out = resform(&[
        "sweep",
        "--config",
        &config,
        "--sweep",
        sweep.to_str().unwrap(),
        "--jobs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("planar_nominal.sweep.json")).unwrap()).unwrap();
    assert_eq!(written, stdout_json(&out));
    assert_eq!(written["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn list_scenarios_names_all_bundled() {
    let out = resform(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 14);
    assert!(text.lines().any(|l| l.starts_with("cl_gain_tuning")));
}

#[test]
fn show_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = resform(&["list-scenarios", "--show", "stationary_resilient"]);
    let path = dir.path().join("s.toml");
    std::fs::write(&path, out.stdout).unwrap();
    let a = stdout_json(&resform(&["validate", "--config", path.to_str().unwrap()]));
    let b = stdout_json(&resform(&["validate", "--scenario", "stationary_resilient"]));
    assert_eq!(a["config_hash"], b["config_hash"]);
}
