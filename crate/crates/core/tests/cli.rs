use std::process::Command;

use guided_crn::experiment::config::GuideKind;
use guided_crn::experiment::presets;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_guided-crn"))
}

#[test]
fn presets_lists_names() {
    let out = cli().arg("presets").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "death_pmf"));
}

#[test]
fn missing_config_is_an_io_error() {
    let out = cli().args(["forward", "--config", "/nonexistent/config.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "seed = [not toml").unwrap();
    let out = cli().args(["forward", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = cli().args(["guided", "--preset", "no_such_preset"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exhausted_event_budget_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = presets::gtt_bridge(presets::GTT_TARGET);
    cfg.max_events = 1;
    cfg.replicates = 3;
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let out = cli().args(["forward", "--config"]).arg(&path).arg("--out").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn guided_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = presets::enzyme_scenario('B', GuideKind::PoissonHybrid).unwrap();
    cfg.replicates = 5;
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = cli().args(["guided", "--config"]).arg(&path).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = std::fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().any(|n| n.ends_with(".json")), "{names:?}");
}
