//! End-to-end tests of the command-line interface, driving the built
//! binary the way an operator would.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evstl::sim::{content_hash, Artifact, RunLog};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_evstl")
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Copies a scenario into a fresh temp dir so cache files and outputs stay
/// out of the repository and out of other tests' way.
fn staged(name: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let dst = dir.path().join(name);
    std::fs::copy(scenario_dir().join(name), &dst).unwrap();
    (dir, dst)
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn compile_reports_summary_and_writes_cache() {
    let (dir, scenario) = staged("single_robot.json");
    let out = run_cli(&["compile", scenario.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("1 propositions"), "{text}");
    assert!(text.contains("2 automaton states"), "{text}");

    let cache = dir.path().join("single_robot.artifact.json");
    let artifact: Artifact =
        serde_json::from_str(&std::fs::read_to_string(&cache).unwrap()).unwrap();
    let scenario_text = std::fs::read_to_string(&scenario).unwrap();
    assert_eq!(artifact.scenario_hash, content_hash(&scenario_text));
}

#[test]
fn compile_dump_buchi_lists_transitions() {
    let (_dir, scenario) = staged("single_robot.json");
    let out = run_cli(&["compile", scenario.to_str().unwrap(), "--dump-buchi"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("accepting:"), "{text}");
    assert!(text.contains("-->"), "{text}");
}

#[test]
fn compile_out_writes_artifact() {
    let (dir, scenario) = staged("single_robot.json");
    let artifact_path = dir.path().join("compiled.json");
    let out = run_cli(&[
        "compile",
        scenario.to_str().unwrap(),
        "--out",
        artifact_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let artifact: Artifact =
        serde_json::from_str(&std::fs::read_to_string(&artifact_path).unwrap()).unwrap();
    assert_eq!(artifact.compiled.automaton.num_states, 2);
}

#[test]
fn check_exits_clean_without_findings() {
    let (_dir, scenario) = staged("single_robot.json");
    let out = run_cli(&["check", scenario.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("no a-priori findings"));
}

#[test]
fn check_exits_one_on_conflict() {
    let (_dir, scenario) = staged("physical_demo.json");
    let out = run_cli(&["check", scenario.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("conflict:"), "{text}");
    assert!(text.contains("p_goal1_0_15"), "{text}");
}

#[test]
fn run_writes_log_and_csv_and_monitor_agrees() {
    let (dir, scenario) = staged("single_robot.json");
    let log_path = dir.path().join("run.jsonl");
    let csv_path = dir.path().join("traj.csv");
    let out = run_cli(&[
        "run",
        scenario.to_str().unwrap(),
        "--log",
        log_path.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("HorizonReachedAccepting"));

    let log = RunLog::from_jsonl(&std::fs::read_to_string(&log_path).unwrap()).unwrap();
    assert_eq!(log.records.len(), 201);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("t,robot,dim,value\n"));

    let out = run_cli(&[
        "monitor",
        scenario.to_str().unwrap(),
        log_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("satisfied"));
}

#[test]
fn run_unreachable_stops_fatal_and_monitor_rejects() {
    let (dir, scenario) = staged("unreachable_demo.json");
    let log_path = dir.path().join("run.jsonl");
    let out = run_cli(&[
        "run",
        scenario.to_str().unwrap(),
        "--log",
        log_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("StoppedFatal"), "{text}");
    assert!(text.contains("fatal:"), "{text}");

    let out = run_cli(&[
        "monitor",
        scenario.to_str().unwrap(),
        log_path.to_str().unwrap(),
    ]);
    assert_ne!(out.status.code(), Some(0), "{out:?}");
}

#[test]
fn serve_refuses_scripted_scenarios() {
    let (_dir, scenario) = staged("physical_demo.json");
    let out = run_cli(&["serve", scenario.to_str().unwrap(), "--port", "0"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("interactive"));
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let out = run_cli(&["compile", "/nonexistent/nowhere.json"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}
