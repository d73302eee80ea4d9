use std::process::{Command, Output};

use serde_json::Value;

fn blv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blv")).args(args).output().expect("spawn blv")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn check_bl_exit_codes_follow_the_criterion() {
    let pass = blv(&["check-bl", "zoo:symmetric-group", "--n", "3", "--c", "1/2", "--draws", "20"]);
    assert_eq!(pass.status.code(), Some(0));
    assert_eq!(json(&pass)["edge"]["pass"], true);

    let fail = blv(&["check-bl", "zoo:symmetric-group", "--n", "3", "--c", "1", "--draws", "20"]);
    assert_eq!(fail.status.code(), Some(1));
    let report = json(&fail);
    assert_eq!(report["edge"]["max_sum"], "2");
}

#[test]
fn errors_exit_with_two() {
    assert_eq!(blv(&["check-bl", "/nonexistent/model.json", "--c", "1/2"]).status.code(), Some(2));
    assert_eq!(blv(&["check-bl", "zoo:symmetric-group", "--c", "1/2"]).status.code(), Some(2));
    assert_eq!(blv(&["check-bl", "zoo:symmetric-group", "--n", "3", "--c", "3/2"]).status.code(), Some(2));
    assert_eq!(blv(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn optimize_returns_exact_halves_on_the_slice() {
    let out = blv(&["optimize", "zoo:slice", "--n", "4", "--k", "2"]);
    assert!(out.status.success());
    let c = &json(&out)["optimum"]["c"];
    assert_eq!(c, &serde_json::json!(["1/2", "1/2", "1/2", "1/2"]));
}

#[test]
fn verify_with_zero_trials_is_an_empty_pass() {
    let out = blv(&["verify", "zoo:symmetric-group", "--n", "3", "--c", "1/2", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["trials"], 0);
    assert_eq!(report["n_violations"], 0);
    assert!(report["min_global_gap"].is_null());
}

#[test]
fn verify_is_deterministic_for_a_seed() {
    let args = ["verify", "zoo:slice", "--n", "4", "--k", "2", "--c", "1/2", "--trials", "20", "--restarts", "2", "--seed", "11"];
    let a = blv(&args);
    let b = blv(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = Command::new(env!("CARGO_BIN_EXE_blv")).args(args).env("BLV_THREADS", "1").output().unwrap();
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn zoo_build_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s3.json");
    let path_str = path.to_str().unwrap();
    let built = blv(&["--output", path_str, "zoo", "build", "symmetric-group", "--n", "3"]);
    assert!(built.status.success(), "{}", String::from_utf8_lossy(&built.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["n_states"], 6);
    assert_eq!(doc["maps"].as_array().unwrap().len(), 3);

    let commute = blv(&["check-commute", path_str]);
    assert_eq!(commute.status.code(), Some(0));
    let bl = blv(&["check-bl", path_str, "--c", "1/2", "--draws", "10"]);
    assert_eq!(bl.status.code(), Some(0));
}

#[test]
fn non_lumpable_map_fails_check_commute() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"kernel": [["0","1/2","1/2"],["1/2","0","1/2"],["1/2","1/2","0"]],
            "maps": [{"name": "split", "labeling": [0, 0, 1]}, {"name": "all", "labeling": [0, 0, 0]}]}"#,
    )
    .unwrap();
    let out = blv(&["check-commute", path.to_str().unwrap()]);
    // Merging two states of the complete graph is lumpable; the check passes.
    assert_eq!(out.status.code(), Some(0));

    std::fs::write(
        &path,
        r#"{"kernel": [["0","1","0"],["1/2","0","1/2"],["0","1","0"]],
            "maps": [{"name": "split", "labeling": [0, 1, 1]}]}"#,
    )
    .unwrap();
    let out = blv(&["check-commute", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn entropy_writes_json_lines_and_a_summary() {
    let out = blv(&["entropy", "zoo:symmetric-group", "--n", "3", "--c", "1/2", "--trials", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[..3].iter().all(|l| l["entropy_gap"].as_f64().unwrap() >= 0.0));
    assert_eq!(lines[3]["summary"]["pass"], true);
}

#[test]
fn geo_commands() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub.json");
    std::fs::write(&path, r#"{"n": 3, "subspaces": [{"indices": [1, 2]}, {"indices": [2, 3]}, {"indices": [1, 3]}]}"#)
        .unwrap();
    let ok = blv(&["geo", "check", "--subspaces", path.to_str().unwrap(), "--c", "1/2"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let too_big = blv(&["geo", "check", "--subspaces", path.to_str().unwrap(), "--c", "1"]);
    assert_ne!(too_big.status.code(), Some(0));

    let sphere = blv(&["geo", "sphere", "--n", "2", "--poly", "1,0,1", "--poly", "1"]);
    assert_eq!(sphere.status.code(), Some(0));
    assert!(json(&sphere)["report"]["gap"].as_f64().unwrap() > 0.0);
}
