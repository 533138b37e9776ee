//! The `stoptime` binary against the JSON fixtures.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

fn run(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_stoptime")).args(args).output().expect("spawn stoptime");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), report)
}

fn norm_of(file: &str, space: &str, base: &str) -> f64 {
    let path = fixture(file);
    let (code, r) = run(&["norm", path.to_str().unwrap(), "--space", space, "--base", base]);
    assert_eq!(code, 0, "{r}");
    r["outputs"]["value"].as_f64().unwrap()
}

#[test]
fn norm_fixtures() {
    assert_eq!(norm_of("ones-depth-1.json", "S", "lp:1"), 2.0);
    assert_eq!(norm_of("ones-depth-2.json", "B", "lp:1"), 3.0);
    assert!((norm_of("f0-plus-f1.json", "D", "lp:1") - 1.0).abs() < 1e-12);
}

#[test]
fn norm_witness_is_an_antichain() {
    let path = fixture("ones-depth-2.json");
    let (code, r) = run(&["norm", path.to_str().unwrap(), "--space", "S", "--witness"]);
    assert_eq!(code, 0);
    let w: Vec<&str> = r["outputs"]["witness"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(w.len(), 4);
    for a in &w {
        for b in &w {
            assert!(a == b || !(a.starts_with(b) || b.starts_with(a)));
        }
    }
}

#[test]
fn input_errors_exit_two() {
    let bad = fixture("malformed.json");
    assert_eq!(run(&["norm", bad.to_str().unwrap(), "--space", "S"]).0, 2);
    let ones = fixture("ones-depth-1.json");
    assert_eq!(run(&["norm", ones.to_str().unwrap(), "--space", "S", "--base", "lp:0.5"]).0, 2);
    assert_eq!(run(&["norm", "/nonexistent.json", "--space", "S"]).0, 2);
    let s_op = fixture("s-operator-depth-1.json");
    let (code, _) = run(&["factorize", s_op.to_str().unwrap(), "--delta", "0.5", "--eta", "0.5", "--out-depth", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn custom_base_beyond_the_cap_is_an_input_error() {
    let ones = fixture("ones-depth-2.json");
    let (code, _) = run(&["norm", ones.to_str().unwrap(), "--space", "S", "--base", "custom:unregistered"]);
    assert_eq!(code, 2);
}

#[test]
fn small_diagonal_names_the_node() {
    let path = fixture("small-diagonal-depth-2.json");
    let (code, r) = run(&["factorize", path.to_str().unwrap(), "--delta", "0.5", "--eta", "0.5", "--out-depth", "1"]);
    assert_eq!(code, 3);
    assert_eq!(r["outputs"]["detail"]["node"], "01");
}

#[test]
fn scaled_identity_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let path = fixture("two-identity-depth-3.json");
    let (code, r) = run(&[
        "factorize",
        path.to_str().unwrap(),
        "--delta",
        "1",
        "--eta",
        "0.5",
        "--out-depth",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(r["outputs"]["residual"], 0.0);
    assert_eq!(r["outputs"]["norm_product_bound"], 0.5);
    let cert: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(cert["residual"], 0.0);
    assert_eq!(cert["a"]["rows"].as_array().unwrap().len(), 15);
}

#[test]
fn diagonal_and_near_diagonal_certificates() {
    for (file, tol) in [("diagonal-depth-4.json", 1e-10), ("near-diagonal-seed-7-depth-5.json", 0.05)] {
        let path = fixture(file);
        let (code, r) = run(&["factorize", path.to_str().unwrap(), "--delta", "0.5", "--eta", "0.5", "--out-depth", "2"]);
        assert_eq!(code, 0, "{file}");
        assert!(r["outputs"]["residual"].as_f64().unwrap() <= tol, "{file}");
        assert!(r["outputs"]["norm_product_bound"].as_f64().unwrap() <= 3.0, "{file}");
    }
}

#[test]
fn residual_above_tolerance_exits_four() {
    let path = fixture("dense-depth-2.json");
    let args = |tol: &'static str| {
        run(&["factorize", path.to_str().unwrap(), "--delta", "1", "--eta", "0.5", "--out-depth", "1", "--tolerance", tol])
    };
    let (code, r) = args("0.05");
    assert_eq!(code, 0);
    let residual = r["outputs"]["residual"].as_f64().unwrap();
    assert!(residual > 0.01 && residual <= 0.05, "{residual}");
    let (code, r) = args("0.01");
    assert_eq!(code, 4);
    assert!(r["outputs"]["error"].as_str().unwrap().contains("tolerance"));
    assert_eq!(args("-1").0, 2);
}

#[test]
fn reports_are_deterministic_apart_from_timings() {
    let path = fixture("ones-depth-2.json");
    let args = ["norm", path.to_str().unwrap(), "--space", "D", "--witness"];
    let (_, mut a) = run(&args);
    let (_, mut b) = run(&args);
    a["timings"] = Value::Null;
    b["timings"] = Value::Null;
    assert_eq!(a, b);
    for field in ["command", "inputs", "inputs_digest", "outputs", "seed", "version"] {
        assert!(a.get(field).is_some(), "missing {field}");
    }
    assert_eq!(a["inputs_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn digest_tracks_arguments() {
    let path = fixture("ones-depth-2.json");
    let (_, a) = run(&["norm", path.to_str().unwrap(), "--space", "S"]);
    let (_, b) = run(&["norm", path.to_str().unwrap(), "--space", "B"]);
    assert_ne!(a["inputs_digest"], b["inputs_digest"]);
}

#[test]
fn game_round_trips_through_a_transcript_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("game.json");
    let (code, first) = run(&["game", "--seed", "3", "--host-depth", "8", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{first}");
    let (code, replay) = run(&["game", "--moves", out.to_str().unwrap(), "--host-depth", "8"]);
    assert_eq!(code, 0);
    assert_eq!(first["outputs"]["images"], replay["outputs"]["images"]);
}

#[test]
fn randomized_commands_need_a_seed() {
    assert_eq!(run(&["game"]).0, 2);
    assert_eq!(run(&["verify", "--suite", "norms"]).0, 2);
    assert_eq!(run(&["ramsey", "--depth", "2"]).0, 2);
}

#[test]
fn ramsey_on_a_seeded_colouring() {
    let (code, r) = run(&["ramsey", "--seed", "4", "--host-depth", "8", "--depth", "3"]);
    assert_eq!(code, 0);
    assert_eq!(r["outputs"]["verified"], true);
    assert_eq!(r["seed"], 4);
}

#[test]
fn verify_norm_suite() {
    let (code, r) = run(&["verify", "--suite", "norms", "--seed", "2"]);
    assert_eq!(code, 0, "{r}");
    let criteria = r["outputs"]["criteria"].as_array().unwrap();
    assert_eq!(criteria[0]["id"], 1);
    assert!(criteria[0]["checks"].as_u64().unwrap() >= 500);
    assert!(criteria.iter().all(|c| c["passed"] == true));
}
