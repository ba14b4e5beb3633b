use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use hotr_core::fe::{Beam, BeamConfig, CrackSpec};
use hotr_core::identify::ForwardModel;
use hotr_core::rom::{SubBuilder, SubstructureSplit};
use serde_json::Value;

fn hotr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hotr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).expect("error report is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_replicates_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hotr(dir.path(), &["montecarlo", "--replicates", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_config_key_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"ga": {"population": 8, "mutaton_scale": 2}}"#,
    )
    .unwrap();
    let o = hotr(dir.path(), &["--config", "c.json", "mesh"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "config");
    assert_eq!(e["error"]["path"], "ga.mutaton_scale");
}

#[test]
fn invalid_config_value_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"crack": {"location_index": 0, "depth_percent": 10}}"#,
    )
    .unwrap();
    let o = hotr(dir.path(), &["--config", "c.json", "mesh"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["path"], "crack.location_index");
}

#[test]
fn missing_config_file_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hotr(dir.path(), &["--config", "nope.json", "mesh"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_are_reproducible_and_tagged() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = hotr(dir.path(), &["--out", out, "--seed", "7", "sdof-demo"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a/sdof.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/sdof.json")).unwrap();
    assert_eq!(a, b);
    let doc = read_json(&dir.path().join("a/sdof.json"));
    let resolved = read_json(&dir.path().join("a/config.resolved.json"));
    assert_eq!(resolved["seed"], 7);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    let d = &doc["data"];
    assert!(
        d["cracked_x2_over_x1"].as_f64().unwrap()
            > 100.0 * d["healthy_x2_over_x1"].as_f64().unwrap()
    );
    let csv = std::fs::read_to_string(dir.path().join("a/sdof.csv")).unwrap();
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .contains(doc["config_hash"].as_str().unwrap()));
}

#[test]
fn changing_the_config_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let o = hotr(dir.path(), &["--seed", seed, "sdof-demo"]);
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(run("1"), run("2"));
    assert_eq!(run("1"), run("1"));
}

#[test]
fn mesh_reports_grid_and_gauges() {
    let dir = tempfile::tempdir().unwrap();
    let o = hotr(dir.path(), &["mesh"]);
    assert!(o.status.success());
    let d = read_json(&dir.path().join("out/mesh.json"))["data"].clone();
    assert_eq!(d["elements"], 2400);
    assert_eq!(d["contact_pairs"], 2);
    let nodes = std::fs::read_to_string(dir.path().join("out/nodes.csv")).unwrap();
    assert_eq!(
        nodes.lines().filter(|l| !l.starts_with('#')).count(),
        1 + 2543
    );
}

#[test]
fn bench_writes_one_row_per_reduced_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = hotr(dir.path(), &["bench", "--runs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_json(&dir.path().join("out/bench.json"))["data"].clone();
    let rows = d["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["model"], "rb");
    assert_eq!(rows[1]["model"], "sub");
    for r in rows {
        assert!(r["construction_s"].as_f64().unwrap() > 0.0);
        assert!(r["speedup"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn identify_recovers_the_crack_behind_a_measurement_file() {
    let dir = tempfile::tempdir().unwrap();
    let beam = Arc::new(Beam::new(BeamConfig::default()).unwrap());
    let builder = SubBuilder::new(beam, SubstructureSplit::default(), 6, None).unwrap();
    let forward = ForwardModel::new(Arc::new(builder), 2.0 * std::f64::consts::PI * 128.0).unwrap();
    let truth = CrackSpec::new(60, 10);
    let records = forward.simulate(&truth);
    let records = records.as_ref().as_ref().unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        serde_json::to_string(records).unwrap(),
    )
    .unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"identification": {"depths": [10], "noise_percent": 0.0}, "ga": {"population": 10, "max_generations": 30}}"#,
    )
    .unwrap();
    let o = hotr(
        dir.path(),
        &["--config", "c.json", "identify", "--measurement", "m.json"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d = read_json(&dir.path().join("out/identification.json"))["data"].clone();
    assert_eq!(d["result"]["crack"]["location_index"], 60);
    assert!(d["result"]["j"].as_f64().unwrap() < 1e-6);
}

#[test]
fn malformed_measurement_names_the_bad_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), r#"[{"order": 2, "m": 0}]"#).unwrap();
    let o = hotr(dir.path(), &["identify", "--measurement", "m.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "config");
}
