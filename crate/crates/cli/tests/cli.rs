use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn starcount(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starcount"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_out(args: &[&str]) -> Value {
    let out = starcount(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn count_golden() {
    let v = json_out(&["count", "--l", "1.6180339887", "--eps", "0.1", "--r", "0.5", "--t", "100"]);
    let tile = json_out(&["count", "--l", "1.6180339887", "--eps", "0.1", "--r", "0.5", "--t", "100", "--method", "tile"]);
    assert_eq!(v["count"], tile["count"]);
    assert!(v["count"].as_u64().unwrap() > 0);
}

#[test]
fn sum_kruse_value() {
    let v = json_out(&["sum", "--kind", "s", "--alpha", "0.41421356237", "--t", "1000", "--split"]);
    let total = v["value"].as_f64().unwrap();
    let split = &v["split"];
    let parts = split["s1"].as_f64().unwrap() + split["s2"].as_f64().unwrap() + split["s3"].as_f64().unwrap();
    assert!((total - parts).abs() <= 1e-9 * total);
}

#[test]
fn certify_and_estimate() {
    let v = json_out(&["certify", "--l", "1.6180339887", "--phi", "const:0.3", "--qmax", "1000"]);
    assert_eq!(v["holds"], true);
    assert_eq!(v["worst_q"][0], 1);
    let v = json_out(&["certify", "--estimate", "1.6180339887", "--qmax", "100"]);
    assert!((v["c_alpha"].as_f64().unwrap() - 0.381966).abs() < 1e-6);
}

#[test]
fn weights_fractions() {
    let v = json_out(&["weights", "--m", "1", "--rows", "1,0;1,1"]);
    assert_eq!(v["k"], serde_json::json!(["2", "6"]));
    assert_eq!(v["alpha"], serde_json::json!(["1/2", "2/3"]));
    let out = starcount(&["weights", "--m", "1", "--rows", "1,1;1,0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nested"));
}

#[test]
fn minima_of_golden_lattice() {
    let v = json_out(&["minima", "--l", "1.6180339887", "--monotone"]);
    let minima = v["profile"]["minima"].as_array().unwrap();
    assert_eq!(minima.len(), 2);
    let prod = minima[0].as_f64().unwrap() * minima[1].as_f64().unwrap();
    assert!((0.25..=4.0).contains(&prod));
}

#[test]
fn schmidt_const_family() {
    let v = json_out(&["schmidt", "--s", "2", "--family", "const"]);
    assert_eq!(v["moment"]["lhs"], 5.0);
    assert_eq!(v["moment"]["bound"], 8.0);
}

#[test]
fn tess_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("tiles");
    let v = json_out(&[
        "tess", "--domain", "h2", "--eps", "0.1", "--r", "0.5", "--t", "10,20",
        "--out", prefix.to_str().unwrap(),
    ]);
    assert_eq!(v["tiles"], 3 * 3 * 4);
    let csv = std::fs::read_to_string(dir.path().join("tiles.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 36);
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn experiment_reproducible_and_emits_all_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mode":"kruse","seed":7,"grid":{"samples":2,"t":[100,1000]}}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (prefix, workers) in [(&a, "1"), (&b, "2")] {
        let out = starcount(&["experiment", "--config", &cfg, "--out", prefix.to_str().unwrap(), "--workers", workers]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert!(csv_a.starts_with(b"mode,seed,m,n,T1,lhs,rhs,ratio,flags\n"));
    let gp = std::fs::read_to_string(dir.path().join("a.gp")).unwrap();
    assert!(gp.contains("a.csv"));
    let json: Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mode":"kruse","seed":7,"grid":{"samples":2,"t":[]}}"#);
    let out = starcount(&["experiment", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty grid"));
    // Box far over the enumeration budget.
    let out = starcount(&["count", "--l", "0.5,0.25", "--eps", "0.1", "--r", "0.5", "--t", "100000,100000"]);
    assert_eq!(out.status.code(), Some(2));
    let out = starcount(&["minima", "--l", "1,2,3,4,5,6;1,2,3,4,5,6;1,2,3,4,5,6"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(starcount(&["count", "--bogus"]).status.code(), Some(1));
    assert_eq!(starcount(&["--help"]).status.code(), Some(0));
}
