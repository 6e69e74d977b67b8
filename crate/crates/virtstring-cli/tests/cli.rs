use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_virtstring"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn run_json(args: &[&str]) -> Value {
    let (code, stdout, stderr) = run(args);
    assert_eq!(code, 0, "stderr: {stderr}");
    serde_json::from_str(&stdout).expect("valid JSON output")
}

#[test]
fn invariants_of_torus_string() {
    let report = run_json(&["invariants", "a b c b' a' c'", "--json"]);
    assert_eq!(report["u"], "-t^2+2t");
    assert_eq!(report["rho"], 3);
    assert_eq!(report["genus"], 2);
    assert_eq!(report["sigma"], 1);
    assert_eq!(report["ribbon"], false);
    assert_eq!(report["slice"]["report"]["verdict"], "NotSlice");
}

#[test]
fn invariants_of_trivial_string() {
    let report = run_json(&["invariants", "", "--json"]);
    assert_eq!(report["rank"], 0);
    assert_eq!(report["u"], "0");
    assert_eq!(report["rho"], 0);
    assert_eq!(report["genus"], 0);
    assert_eq!(report["sigma"], 0);
    assert_eq!(report["hyperbolic"], true);
    assert_eq!(report["ribbon"], true);
    assert_eq!(report["cobracket_zero"], true);
    assert_eq!(report["reduces_to_trivial"], true);
}

#[test]
fn invariants_primitive_matrix_golden() {
    // the permutation (12)(34) string; its matrix is already primitive
    let code = "a b c d c' d' a' b'";
    let report = run_json(&["invariants", code, "--json"]);
    let want = serde_json::json!([
        [0, -1, 1, -1, 1],
        [1, 0, 1, -1, 1],
        [-1, -1, 0, -1, 1],
        [1, 1, 1, 0, 1],
        [-1, -1, -1, -1, 0]
    ]);
    assert_eq!(report["primitive_matrix"]["b"], want);
    assert_eq!(report["ribbon"], true);
}

#[test]
fn parse_errors_exit_with_code_two() {
    let (code, _, stderr) = run(&["invariants", "a b ?? a' b'"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("??"), "diagnostic names the token: {stderr}");
    let (code, _, _) = run(&["knot", "nabla", "a+ b a' b'"]);
    assert_eq!(code, 2);
}

#[test]
fn homotopy_equal_verdicts() {
    let v = run_json(&["homotopy-equal", "a b b' a'", "a a'", "--json"]);
    assert_eq!(v["verdict"], "Equal");
    let v = run_json(&["homotopy-equal", "a b c a' c' b'", "a a'", "--json"]);
    assert_eq!(v["verdict"], "Distinct");
    assert!(v["witness"].is_string());
}

#[test]
fn classify_rank_three() {
    let v = run_json(&["classify", "--rank", "3", "--json"]);
    assert_eq!(v["classes"].as_array().unwrap().len(), 3);
    assert_eq!(v["unknown_pairs"].as_array().unwrap().len(), 0);
}

#[test]
fn cobracket_of_low_rank_string_vanishes() {
    let (code, stdout, _) = run(&["cobracket", "a b c b' a' c'"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "0");
}

#[test]
fn knot_nabla_outputs() {
    let (code, stdout, _) = run(&["knot", "nabla", "a+ b+ c+ a' c' b'"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("a b c a' c' b'"));
    let (code, stdout, _) = run(&["knot", "nabla", "a+ b+ c+ a' c' b'", "--ut"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "t^2 - 2*t");
    let v = run_json(&["knot", "nabla", "a+ b+ c+ a' c' b'", "--ut", "--json"]);
    assert_eq!(v["nabla_ut"].as_array().unwrap().len(), 2);
}

#[test]
fn realize_u_round_trips() {
    let v = run_json(&["realize-u", "2t^4-4t^2", "--json"]);
    assert_eq!(v["check"], v["poly"]);
    let (code, _, _) = run(&["realize-u", "t"]);
    assert_ne!(code, 0);
}

#[test]
fn svg_rendering() {
    let dir = std::env::temp_dir().join("virtstring-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("fig.svg");
    let path_text = path.to_str().unwrap();
    let (code, _, _) = run(&["svg", "x' y z' x z y'", path_text]);
    assert_eq!(code, 0);
    let svg = std::fs::read_to_string(&path).unwrap();
    assert_eq!(svg.matches("<line").count(), 3);
    let (code, _, _) = run(&["svg", "a+ b- a' b'", path_text]);
    assert_eq!(code, 0);
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.contains(">a+<") && svg.contains(">b-<"));
    let (code, _, _) = run(&["svg", "", path_text]);
    assert_eq!(code, 0);
    let svg = std::fs::read_to_string(&path).unwrap();
    assert_eq!(svg.matches("<line").count(), 0);
}
