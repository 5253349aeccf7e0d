//! Acceptance suite: one test, and one printed PASS/FAIL line, per
//! criterion. Thresholds live in `qsphere_cli::tolerances`.

use std::process::Command;

use qsphere_cli::acceptance::{self, SuiteConfig};

fn criterion(id: u8) {
    let c = acceptance::run(id, &SuiteConfig::default());
    println!("{}", c.summary());
    assert!(c.pass(), "{}", c.summary());
}

#[test]
fn criterion_01_exact_spectral_identities() {
    criterion(1);
}

#[test]
fn criterion_02_kernel_of_the_linearization() {
    criterion(2);
}

#[test]
fn criterion_03_self_adjointness() {
    criterion(3);
}

#[test]
fn criterion_04_closed_forms() {
    criterion(4);
}

#[test]
fn criterion_05_witness_pairing() {
    criterion(5);
}

#[test]
fn criterion_06_fredholm_reduction() {
    criterion(6);
}

#[test]
fn criterion_07_kazdan_warner() {
    criterion(7);
}

#[test]
fn criterion_08_even_data() {
    criterion(8);
}

#[test]
fn criterion_09_pullback_family() {
    criterion(9);
}

#[test]
fn criterion_10_equivariance() {
    criterion(10);
}

#[test]
fn criterion_11_determinism() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_qsphere"))
            .args(["report", "--all", "--seed", "0"])
            .output()
            .expect("qsphere runs")
    };
    let (a, b) = (run(), run());
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).expect("report is JSON");
    let identical = !a.stdout.is_empty() && a.stdout == b.stdout && a.status.code() == b.status.code();
    let internal = doc["criteria"][10]["status"] == "PASS";
    let pass = identical && internal;
    println!(
        "criterion 11 [{}]: {} (two runs byte-identical: {identical}; concurrent vs sequential: {internal})",
        acceptance::name(11),
        if pass { "PASS" } else { "FAIL" },
    );
    assert!(pass);
}
