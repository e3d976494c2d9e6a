use std::fs;
use std::process::{Command, Output};

use reguard_core::scenario::builtin;
use tempfile::tempdir;

fn reguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reguard")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unguarded_attack_succeeds() {
    let o = reguard(&["run", "--scenario", "s2", "--guards", "none"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict:  succeeded"), "{}", stdout(&o));
}

#[test]
fn guarded_attack_reports_the_blocking_guard() {
    let o = reguard(&["run", "--scenario", "s2", "--guards", "mutex"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("blocked"), "{out}");
    assert!(out.contains("get_price"), "{out}");
}

#[test]
fn machine_run_is_json() {
    let o = reguard(&["run", "--scenario", "s1", "--guards", "once-per-tx", "--format", "machine"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).expect("json output");
    assert!(v.to_string().contains("blocked"));
}

#[test]
fn unknown_scenario_is_an_input_error() {
    let o = reguard(&["run", "--scenario", "nope", "--guards", "none"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("s1"), "known ids listed: {}", stderr(&o));
}

#[test]
fn unknown_profile_lists_known_profiles() {
    let o = reguard(&["matrix", "--scenarios", "s1", "--profiles", "mars"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for p in ["ethereum", "optimism", "polygon-zkevm"] {
        assert!(err.contains(p), "{err}");
    }
}

#[test]
fn bad_flag_exits_two() {
    assert_eq!(reguard(&["matrix", "--bogus"]).status.code(), Some(2));
    assert_eq!(reguard(&[]).status.code(), Some(2));
    assert_eq!(reguard(&["--help"]).status.code(), Some(0));
}

#[test]
fn matrix_output_is_reproducible() {
    let args = ["matrix", "--profiles", "ethereum,polygon-zkevm", "--format", "machine"];
    let a = reguard(&args);
    let b = reguard(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn polygon_column_differs_for_block_based_duration() {
    let o = reguard(&[
        "matrix",
        "--scenarios",
        "s4",
        "--guards",
        "duration-blocks",
        "--profiles",
        "ethereum,polygon-zkevm",
        "--format",
        "machine",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let verdict = |profile: &str| {
        v["cells"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["profile"] == profile)
            .map(|c| c["verdict"]["verdict"].as_str().unwrap().to_string())
            .unwrap()
    };
    assert_eq!(verdict("ethereum"), "blocked");
    assert_eq!(verdict("polygon-zkevm"), "succeeded");
}

#[test]
fn output_flag_writes_the_report() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("matrix.txt");
    let o = reguard(&["matrix", "--scenarios", "s1,s1-honest", "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("s1-honest"), "{text}");
    assert!(text.contains("monotonicity"), "{text}");
}

#[test]
fn replay_passes() {
    let o = reguard(&["replay-sentiment"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).contains("FAIL"), "{}", stdout(&o));
}

#[test]
fn scenario_and_guard_files_round_trip() {
    let dir = tempdir().unwrap();
    let scenario = dir.path().join("s3.json");
    let guards = dir.path().join("g.json");
    let s = builtin::scenarios().into_iter().find(|s| s.id == "s3").unwrap();
    let g = builtin::guard_configs().into_iter().find(|g| g.id == "once-per-tx").unwrap();
    fs::write(&scenario, serde_json::to_string_pretty(&s).unwrap()).unwrap();
    fs::write(&guards, serde_json::to_string_pretty(&g).unwrap()).unwrap();
    let before = (fs::read(&scenario).unwrap(), fs::read(&guards).unwrap());

    let o = reguard(&["validate", scenario.to_str().unwrap(), guards.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("ok ")).count(), 2);
    assert_eq!(before, (fs::read(&scenario).unwrap(), fs::read(&guards).unwrap()));

    let o = reguard(&["run", "--scenario", scenario.to_str().unwrap(), "--guards", guards.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("blocked"), "{}", stdout(&o));
}

#[test]
fn malformed_file_fails_validation() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"transactions\": 7}").unwrap();
    let o = reguard(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!stderr(&o).is_empty());
    assert_eq!(fs::read_to_string(&bad).unwrap(), "{\"transactions\": 7}");
}
