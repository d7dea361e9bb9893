use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dextron-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dextron"))
        .args(args)
        .arg("--dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn stderr_error(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn gen_writes_sixteen_trajectories_and_config() {
    let dir = scratch("gen");
    let summary = stdout_json(&run(&dir, &["gen"]));
    assert_eq!(summary["trajectories"], 16);
    let files = std::fs::read_dir(dir.join("trajectories")).unwrap().count();
    assert_eq!(files, 16);
    let conf = std::fs::read_to_string(dir.join("gen.conf")).unwrap();
    assert!(conf.contains("lift_height"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = scratch("unknown");
    let err = stderr_error(&run(&dir, &["gen", "--set", "no_such_key=1"]));
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("no_such_key"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn malformed_set_is_rejected() {
    let dir = scratch("malformed");
    let err = stderr_error(&run(&dir, &["gen", "--set", "lift_height"]));
    assert_eq!(err["error"], "config");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn missing_checkpoint_is_reported() {
    let dir = scratch("ckpt");
    stdout_json(&run(&dir, &["gen"]));
    let err = stderr_error(&run(&dir, &["eval", "--mode", "rlil"]));
    assert_eq!(err["error"], "missing-checkpoint");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn search_then_expert_eval_reproduces_stored_returns() {
    let dir = scratch("search");
    stdout_json(&run(&dir, &["gen"]));
    let stats = stdout_json(&run(&dir, &["mc", "--set", "n_samples=2000", "--workers", "2"]));
    let accepted = stats["n_accepted"].as_u64().unwrap();
    assert!(accepted > 0);
    assert!(dir.join("gs.jsonl").exists());

    let eval = stdout_json(&run(&dir, &["eval", "--mode", "expert", "--set", "episodes=50"]));
    let n = eval["episodes"].as_u64().unwrap();
    assert_eq!(n, accepted.min(50));
    let stored: Vec<u64> = std::fs::read_to_string(dir.join("gs.jsonl"))
        .unwrap()
        .lines()
        .take(n as usize)
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["return"].as_u64().unwrap())
        .collect();
    let replayed: Vec<u64> = eval["returns"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(stored, replayed);

    let err = stderr_error(&run(&dir, &["eval", "--mode", "expert", "--set", "episodes=0"]));
    assert_eq!(err["error"], "config");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn same_seed_gives_identical_search_output() {
    let a = scratch("seed-a");
    let b = scratch("seed-b");
    for dir in [&a, &b] {
        stdout_json(&run(dir, &["gen"]));
    }
    stdout_json(&run(&a, &["mc", "--set", "n_samples=500", "--workers", "1", "--seed", "3"]));
    stdout_json(&run(&b, &["mc", "--set", "n_samples=500", "--workers", "3", "--seed", "3"]));
    let read = |d: &Path| std::fs::read_to_string(d.join("gs.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
    std::fs::remove_dir_all(&a).unwrap();
    std::fs::remove_dir_all(&b).unwrap();
}
