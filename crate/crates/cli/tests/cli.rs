use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spline-compander"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spline-compander-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn odd_level_count_is_a_usage_error() {
    let out = run(&["design", "--levels", "7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn out_of_range_threshold_is_a_usage_error() {
    assert_eq!(run(&["design", "--x1", "9"]).status.code(), Some(2));
    assert_eq!(run(&["design", "--x1", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--grid-step", "0"]).status.code(), Some(2));
}

#[test]
fn design_with_fixed_threshold_reports_consistent_json() {
    let v = json(&run(&["design", "--levels", "16", "--x1", "1.68"]));
    assert_eq!(v["n_levels"], 16);
    assert_eq!(v["x1"].as_f64().unwrap(), 1.68);
    assert_eq!(v["x1_source"], "given");
    let counts: u64 = v["counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(counts, 7);
    let d = &v["distortion"];
    let sqnr = d["sqnr_db"].as_f64().unwrap();
    let total = d["total"].as_f64().unwrap();
    assert!((sqnr + 10.0 * total.log10()).abs() < 1e-4);
    assert_eq!(v["segments"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_csv_has_header_and_sorted_rows() {
    let out = run(&["sweep", "--levels", "16", "--format", "csv"]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "x1");
    assert!(headers.iter().any(|h| h == "sqnr_db"));
    let xs: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[0].parse::<f64>().unwrap())
        .collect();
    assert!(xs.len() > 100);
    assert!(xs.windows(2).all(|w| w[0] < w[1]));
    // The manifest line goes to stderr when writing to stdout.
    let manifest: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(manifest["command"], "sweep");
}

#[test]
fn validate_is_reproducible() {
    let args = [
        "validate",
        "--levels",
        "16",
        "--x1",
        "1.68",
        "--samples",
        "100000",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(matches!(a.status.code(), Some(0) | Some(4)));
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["samples"], 100000);
    let verdict = v["verdict"].as_str().unwrap();
    assert_eq!(verdict == "PASS", a.status.code() == Some(0));
}

#[test]
fn out_flag_writes_output_and_manifest() {
    let path = scratch("lloyd.json");
    let out = run(&[
        "lloyd-max",
        "--levels",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["levels"].as_array().unwrap().len(), 4);
    let manifest_path = PathBuf::from(format!("{}.manifest.json", path.display()));
    let m: Value = serde_json::from_slice(&std::fs::read(manifest_path).unwrap()).unwrap();
    assert_eq!(m["command"], "lloyd-max");
    assert_eq!(m["parameters"]["levels"], "4");
    assert_eq!(m["outputs"][0], path.display().to_string());
    assert!(m["tool_version"].is_string());
}

#[test]
fn table1_json_has_both_rows_and_figure_points() {
    let v = json(&run(&["table1"]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["n_levels"], 16);
    assert_eq!(rows[1]["n_levels"], 32);
    for r in rows {
        let equ = r["sqnr_equ_db"].as_f64().unwrap();
        let num = r["sqnr_num_db"].as_f64().unwrap();
        let opt = r["sqnr_opt_db"].as_f64().unwrap();
        assert!(equ <= num && num <= opt);
    }
    assert!(!v["figure2"].as_array().unwrap().is_empty());
}
