//! End-to-end runs of the `slfv` binary.

use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn slfv(args: &[&str], out: &Path, threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slfv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SLFV_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn nu_runs_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let args = ["nu", "--xs", "50,100", "--reps", "10", "--seed", "1"];
    for (dir, threads) in [(&a, "1"), (&b, "1"), (&c, "3")] {
        let out = slfv(&args, dir, threads);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["nu.csv", "nu_summary.json", "manifest.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
        assert_eq!(read(&a, name), read(&c, name), "{name}");
    }
    let csv = String::from_utf8(read(&a, "nu.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 10);
}

#[test]
fn rerun_verifies_against_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["skeleton-check", "--reps", "5", "--seed", "2"];
    assert_eq!(slfv(&args, tmp.path(), "1").status.code(), Some(0));
    let again = slfv(&args, tmp.path(), "1");
    assert_eq!(again.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&again.stderr).contains("2 output file(s) match the previous manifest"));
}

#[test]
fn manifest_hashes_every_output_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = slfv(&["simulate", "--reps", "2", "--seed", "4"], tmp.path(), "1");
    assert_eq!(out.status.code(), Some(0));
    let manifest: serde_json::Value = serde_json::from_slice(&read(tmp.path(), "manifest.json")).unwrap();
    let files = manifest["files"].as_array().unwrap();
    let mut names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["events.csv", "geodesic.csv", "runs.csv", "simulate_summary.json"]);
    for f in files {
        let data = read(tmp.path(), f["path"].as_str().unwrap());
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&data)));
        assert_eq!(f["bytes"].as_u64().unwrap(), data.len() as u64);
    }
}

#[test]
fn missing_measure_is_a_config_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"master_seed": 3, "params": {"xs": [10]}}"#).unwrap();
    let out = slfv(&["nu", "--config", cfg.to_str().unwrap()], &tmp.path().join("o"), "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("$.measure"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"measure": {"atoms": [{"r": 1, "mass": 1}]}, "replicas": 3}"#).unwrap();
    let out = slfv(&["nu", "--config", cfg.to_str().unwrap()], &tmp.path().join("o"), "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicas"));
}

#[test]
fn unwritable_output_directory_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain-file");
    std::fs::write(&file, b"").unwrap();
    let out = slfv(&["nu", "--xs", "5", "--reps", "2"], &file.join("sub"), "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn truncated_duality_exits_three_with_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = slfv(&["duality", "--x", "50", "--reps", "10", "--window-a", "0.3", "--seed", "5"], tmp.path(), "1");
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&read(tmp.path(), "duality_summary.json")).unwrap();
    assert!(summary["truncation_rate"].as_f64().unwrap() > 0.05);
    assert_eq!(summary["flagged"], true);
}

#[test]
fn exhausted_budget_exits_three_with_partial_log() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"measure": {"atoms": [{"r": 1, "mass": 1}]}, "budget": 20, "params": {"stop": {"event_count": 1000}}}"#,
    )
    .unwrap();
    let dir = tmp.path().join("o");
    let out = slfv(&["simulate", "--config", cfg.to_str().unwrap()], &dir, "1");
    assert_eq!(out.status.code(), Some(3));
    let runs = String::from_utf8(read(&dir, "runs.csv")).unwrap();
    let row: Vec<&str> = runs.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4], "20");
    assert_eq!(row[6], "false");
}

#[test]
fn scripted_style_simulation_writes_a_geodesic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"measure": {"atoms": [{"r": 1, "mass": 1}]},
            "seed_region": {"kind": "point_set", "points": [{"x": 0, "y": 0}]},
            "params": {"stop": {"half_plane_reached": 6}}}"#,
    )
    .unwrap();
    let out = slfv(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "6"], tmp.path(), "1");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let geo = String::from_utf8(read(tmp.path(), "geodesic.csv")).unwrap();
    let rows: Vec<Vec<f64>> = geo
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(6).map(|v| v.parse().unwrap()).collect())
        .collect();
    // seed marker first, then at least ⌈6 / 2⌉ balls, last one reaching x = 6
    assert!(rows.len() >= 4);
    assert_eq!(rows[0][5], 0.0);
    let last = rows.last().unwrap();
    assert!(last[3] + last[5] >= 6.0);
}
