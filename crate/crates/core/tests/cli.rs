//! End-to-end checks of the command-line binary.

use std::path::Path;
use std::process::{Command, Output};

use comp_marl::harness::{load_checkpoint, ExperimentConfig};
use comp_marl::info::{linspace, sweep, InfoParams, SWEEP_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_comp-marl"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_config(dir: &Path, steps: u64) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{"seed": 3, "total_steps": {steps}, "eval_every": 50,
            "topology": {{"rows": 2, "cols": 3}},
            "federation": {{"period_f": 10}}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(run(&["run", "--bogus"]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_2_and_runtime_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"topology": {"rows": 0}}"#).unwrap();
    let out = run(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = run(&["run", "--config", "/nonexistent/cfg.json", "--out", "/tmp/x"]);
    assert_eq!(missing.status.code(), Some(2));
    // the exhaustive oracle refuses the 20-AP default grid at run time
    let big = run(&["baseline", "--kind", "exhaustive", "--worlds", "1"]);
    assert_eq!(big.status.code(), Some(1));
}

#[test]
fn run_twice_gives_identical_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 200);
    let outs: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for o in &outs {
        let res = run(&["run", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["config.json", "metrics.csv", "events.csv", "summary.json", "checkpoint.bin"] {
        let a = std::fs::read(outs[0].join(name)).unwrap();
        let b = std::fs::read(outs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let metrics = std::fs::read_to_string(outs[0].join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,mean_global_reward,ap_reward_min,ap_reward_mean,ap_reward_max,clusters_size1,"));
    assert_eq!(metrics.lines().count(), 1 + 4);
    let events = std::fs::read_to_string(outs[0].join("events.csv")).unwrap();
    assert_eq!(events.lines().count(), 1 + 20);

    let written = ExperimentConfig::load(&outs[0].join("config.json")).unwrap();
    let ckpt = load_checkpoint(&outs[0].join("checkpoint.bin"), Some(&written.hash())).unwrap();
    assert_eq!(ckpt.agents.len(), 6);
    let mut other = written.clone();
    other.topology.cols = 4;
    assert!(load_checkpoint(&outs[0].join("checkpoint.bin"), Some(&other.hash())).is_err());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 100);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&["run", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    run(&["--seed", "99", "run", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    let seed_b = ExperimentConfig::load(&b.join("config.json")).unwrap().seed;
    assert_eq!(seed_b, 99);
    assert_ne!(std::fs::read(a.join("metrics.csv")).unwrap(), std::fs::read(b.join("metrics.csv")).unwrap());
}

#[test]
fn zero_steps_writes_header_and_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 0);
    let out = dir.path().join("o");
    assert!(run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 1);
    let ckpt = load_checkpoint(&out.join("checkpoint.bin"), None).unwrap();
    // linear learners start from zero
    assert!(ckpt.agents.iter().all(|a| a.actor.iter().all(|&v| v == 0.0) && a.r_hat == 0.0));
}

#[test]
fn bound_matches_library_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("fig.json");
    std::fs::write(&params, r#"{"params": {"c_env": 0.1, "c_star": 0.1, "n_agents": 10, "i_star0": 0.01, "epsilon": 0.001}}"#).unwrap();
    let csv = dir.path().join("bound.csv");
    let out = run(&["bound", "--params", params.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SWEEP_HEADER));
    let rows = sweep(&InfoParams::default(), &linspace(0.001, 0.02, 20), &[1, 10, 100]).unwrap();
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), rows.len());
    for (line, row) in body.iter().zip(&rows) {
        assert_eq!(*line, row.to_csv());
    }
    // every row is labelled with one of the three validity markers
    assert!(body.iter().all(|l| ["true", "warn", "false"].contains(&l.rsplit(',').next().unwrap())));
}

#[test]
fn sweep_and_gradcheck_succeed() {
    let out = run(&["sweep", "--k-points", "3", "--f-values", "1,5"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1 + 6);
    let out = run(&["gradcheck", "--points", "5"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("mlp,5,"));
}

#[test]
fn baseline_and_sweep_fed_emit_csv() {
    let out = run(&["baseline", "--kind", "greedy", "--worlds", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.starts_with("kind,worlds,mean_reward,std_reward\ngreedy,5,"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 100);
    let out = run(&["sweep-fed", "--config", cfg.to_str().unwrap(), "--f-values", "5,20"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "F,final_reward,sync_events");
    assert!(lines[1].starts_with("5,") && lines[1].ends_with(",20"));
    assert!(lines[2].starts_with("20,") && lines[2].ends_with(",5"));
}

#[test]
fn init_config_round_trips() {
    let out = run(&["init-config"]);
    let cfg = ExperimentConfig::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}
