use regime_lab::config::ExperimentConfig;
use regime_lab::run::{cmd_limits, cmd_simulate, cmd_stationary, cmd_tailindex, RunOptions};

const STABLE: &str = "
[chain]
states = 2
row.0 = *, 1
row.1 = 2, *

[model]
kind = ou
a = 2, -1
b = 1, 2

[run]
horizon = 10
record = 5, 10
replicates = 200
draws = 2000
compare_horizon = 30
tail_cycles = 20000
seed = 5
";

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

#[test]
fn outputs_land_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_simulate(&cfg(STABLE), RunOptions::default()).unwrap();
    out.write_to(dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 200 * 2);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["manifest"]["derived"]["regime"], "stable");
    assert!(summary["metrics"]["terminal"]["n"].as_u64() == Some(200));
}

#[test]
fn manifest_config_reproduces_outputs() {
    let first = cmd_simulate(&cfg(STABLE), RunOptions { seed: Some(99), threads: Some(2) }).unwrap();
    let echoed = first.summary["manifest"]["config"].as_str().unwrap().to_string();
    let again = cmd_simulate(&cfg(&echoed), RunOptions::default()).unwrap();
    assert_eq!(first.file("trajectory.csv"), again.file("trajectory.csv"));
}

#[test]
fn stationary_reports_comparison() {
    let out = cmd_stationary(&cfg(STABLE), RunOptions::default()).unwrap();
    let ks = out.summary["metrics"]["comparison"]["ks"].as_f64().unwrap();
    assert!(ks < 0.1, "{ks}");
    // E Y^2 is infinite on this chain
    assert!(out.summary["metrics"]["second_moment"]["error"].is_string());
    assert!(out.file("draws.csv").unwrap().starts_with(b"draw,value\n"));
}

#[test]
fn tail_index_matches_oracle() {
    // both anchors: tail index 1.5 of Y on this chain
    let out = cmd_tailindex(&cfg(STABLE), RunOptions::default()).unwrap();
    let nu = out.summary["metrics"]["nu_star"].as_f64().unwrap();
    assert!((nu - 1.5).abs() < 0.1, "{nu}");
    assert!(out.summary["manifest"]["tail_convention"].as_str().unwrap().contains("nu_hat/2"));
}

#[test]
fn limits_on_transient_chain() {
    let text = STABLE.replace("a = 2, -1", "a = -2, 1").replace("b = 1, 2", "b = 1, 1") + "t_grid = 50, 100\nlimit_draws = 5000\ncycles_per_state = 20000\n";
    let out = cmd_limits(&cfg(&text), RunOptions::default()).unwrap();
    let csv = String::from_utf8(out.file("statistics.csv").unwrap().to_vec()).unwrap();
    assert!(csv.starts_with("t,replicate,statistic\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 200);
    for row in out.summary["metrics"]["per_t"].as_array().unwrap() {
        assert!(row["ks"].as_f64().unwrap() < 0.15);
    }
}
