//! End-to-end behaviour of the `qsphere` binary: documents, tables and exit
//! codes.

use std::f64::consts::PI;
use std::process::{Command, Output};

use serde_json::Value;

fn qsphere(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsphere")).args(args).output().expect("qsphere runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

const SMALL: [&str; 4] = ["--lmax", "16", "--oversample", "5"];

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(SMALL).collect()
}

#[test]
fn spectra_table_on_the_two_sphere() {
    let out = qsphere(&["spectra", "--m", "1", "--n", "2", "--imax", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["schema"], "qsphere/1");
    assert_eq!(doc["command"], "spectra");
    let p0: Vec<&str> = doc["rows"].as_array().unwrap().iter().map(|r| r["p0"].as_str().unwrap()).collect();
    assert_eq!(p0, ["0", "2", "6", "12", "20", "30"]);
    assert!(doc["rows"][0]["ratio"].is_null());
    assert!(doc["identities"].as_object().unwrap().values().all(|v| v == "PASS"));
}

#[test]
fn spectra_first_eigenvalue_and_rationals() {
    let doc = json(&qsphere(&["spectra", "--m", "2", "--n", "4", "--imax", "1"]));
    assert_eq!(doc["rows"][1]["p0"], "24");
    let doc = json(&qsphere(&["spectra", "--m", "1", "--n", "3", "--imax", "1"]));
    assert_eq!(doc["rows"][0]["p0"], "3/4");
    assert_eq!(doc["q0"], "3/2");
    assert_eq!(doc["two_star"], "6");
}

#[test]
fn spectra_csv_columns() {
    let out = qsphere(&["spectra", "--m", "1", "--n", "2", "--imax", "2", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "i,lambda,p0,ratio,l_multiplier\n0,0,0,,-2\n1,2,2,3,0\n2,6,6,2,4\n");
}

#[test]
fn invalid_input_exits_with_two() {
    for args in [
        vec!["spectra", "--m", "2", "--n", "2"],
        vec!["kw", "--m", "1", "--n", "2", "--lmax", "7"],
        vec!["kw", "--m", "1", "--n", "2", "--oversample", "1"],
        vec!["pullback", "--m", "1", "--n", "2", "--t", "2"],
        vec!["expand", "--m", "1", "--n", "2", "--h", "0.5"],
        vec!["defect", "--m", "1", "--n", "2"],
        vec!["defect", "--m", "1", "--n", "2", "--tz", "0.1,0.2"],
        vec!["report"],
    ] {
        let out = qsphere(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn thread_variable_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_qsphere"))
        .args(["spectra", "--m", "1", "--n", "2"])
        .env("QSPHERE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_qsphere"))
        .args(["spectra", "--m", "1", "--n", "2"])
        .env("QSPHERE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn expansion_values() {
    let doc = json(&qsphere(&with_small(&["expand", "--m", "1", "--n", "2"])));
    assert_eq!(doc["status"], "PASS");
    assert!((doc["z_pairing"].as_f64().unwrap() - 32.0 * PI / 15.0).abs() < 1e-8);
    assert!(doc["closed_form_error"].as_f64().unwrap() <= 1e-6);
    let doc = json(&qsphere(&with_small(&["expand", "--m", "1", "--n", "3"])));
    assert_eq!(doc["form"], "Q~");
    assert!((doc["c3_z3_coefficient"].as_f64().unwrap() - 30.0).abs() < 1e-6);
    assert!((doc["c2_z2_coefficient"].as_f64().unwrap() + 7.5).abs() < 1e-6);
}

#[test]
fn kw_on_the_graph_and_off() {
    let out = qsphere(&with_small(&["kw", "--m", "2", "--n", "5", "--seeds", "3"]));
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert!(doc["max_relative_kw"].as_f64().unwrap() <= 1e-8);
    assert!(doc["control"].as_f64().unwrap() > 1.0);
    let doc = json(&qsphere(&with_small(&["kw", "--m", "1", "--n", "3", "--amplitude", "0", "--seeds", "1"])));
    assert_eq!(doc["samples"][0]["kw_integral"].as_f64(), Some(0.0));
}

#[test]
fn defect_modes() {
    let doc = json(&qsphere(&with_small(&["defect", "--m", "1", "--n", "3", "--obstruction", "1e-3"])));
    let d = doc["report"]["defect"].as_f64().unwrap();
    assert!((d - 1e-3).abs() < 1e-6, "{d}");
    assert!(doc["report"]["image_gap"].as_f64().unwrap() > 1e-3);

    let out = qsphere(&with_small(&["defect", "--m", "2", "--n", "5", "--moser"]));
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["report"]["defect"].as_f64().unwrap().abs() <= 1e-9);

    let doc = json(&qsphere(&with_small(&["defect", "--m", "1", "--n", "2", "--tz", "0.00025,0.0005,0.001"])));
    assert_eq!(doc["source"], "tz-sweep");
    assert!((doc["fit"]["cubic"].as_f64().unwrap() - 1.6).abs() < 1e-3);
}

#[test]
fn defect_reads_field_files() {
    let dir = std::env::temp_dir().join(format!("qsphere-field-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("f.json");
    std::fs::write(&path, r#"{"params":{"m":1,"n":3},"L_max":16,"coeffs":[0.0,0.0,0.001]}"#).unwrap();
    let p = path.to_str().unwrap();
    let out = qsphere(&with_small(&["defect", "--m", "1", "--n", "3", "--f", p]));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["source"], "file");
    let out = qsphere(&with_small(&["defect", "--m", "1", "--n", "2", "--f", p]));
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn pullback_at_zero_and_csv() {
    let doc = json(&qsphere(&with_small(&["pullback", "--m", "1", "--n", "3", "--t", "0"])));
    assert_eq!(doc["q_residual"].as_f64(), Some(0.0));
    assert!(doc["group_law_error"].as_f64().unwrap() <= 1e-14);
    let out = qsphere(&with_small(&["pullback", "--m", "2", "--n", "5", "--t", "-0.1", "--format", "csv"]));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,q_residual,derivative_error,group_law_error,conformality_error\n-1e-1,"));
}

#[test]
fn output_file_matches_stdout() {
    let path = std::env::temp_dir().join(format!("qsphere-out-{}.json", std::process::id()));
    let args = ["spectra", "--m", "2", "--n", "5", "--imax", "4"];
    let stdout = qsphere(&args).stdout;
    let mut with_file = args.to_vec();
    with_file.extend(["--output", path.to_str().unwrap()]);
    let out = qsphere(&with_file);
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), stdout);
    std::fs::remove_file(&path).unwrap();
}
