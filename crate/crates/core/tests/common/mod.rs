#![allow(dead_code)]

use std::path::PathBuf;

use paramcmp::{build_frame, load_csv, Dataset, ModelFrame};

pub fn fixture_dir() -> PathBuf {
    match std::env::var_os("PARAMCMP_FIXTURES") {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"),
    }
}

pub fn fixture(name: &str) -> PathBuf {
    fixture_dir().join(name)
}

pub fn crime() -> Dataset {
    load_csv(fixture("crime.csv")).expect("crime fixture")
}

pub fn engel() -> Dataset {
    load_csv(fixture("engel1857.csv")).expect("engel fixture")
}

pub fn grunfeld() -> Dataset {
    load_csv(fixture("grunfeld.csv"))
        .and_then(|ds| ds.set_panel("company", "year"))
        .expect("grunfeld fixture")
}

pub fn names(vars: &[&str]) -> Vec<String> {
    vars.iter().map(|s| s.to_string()).collect()
}

pub fn frame(ds: &Dataset, dep: &str, indep: &[&str]) -> ModelFrame {
    build_frame(ds, dep, &names(indep), None).expect("frame")
}

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    ((actual - expected) / expected).abs()
}

#[track_caller]
pub fn assert_rel(actual: f64, expected: f64, tol: f64) {
    assert!(
        rel_err(actual, expected) <= tol,
        "{actual} vs {expected}: relative error {:.3e} > {tol:e}",
        rel_err(actual, expected)
    );
}

#[track_caller]
pub fn assert_abs(actual: f64, expected: f64, tol: f64) {
    assert!(
        (actual - expected).abs() <= tol,
        "{actual} vs {expected}: absolute error {:.3e} > {tol:e}",
        (actual - expected).abs()
    );
}
