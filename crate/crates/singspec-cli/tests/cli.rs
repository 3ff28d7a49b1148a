use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_singspec");

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn example(name: &str) -> String {
    root().join("ex").join(name).to_string_lossy().into_owned()
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("SINGSPEC_TRUNC");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn check_schema(name: &str, instance: &Value) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    let mut schemas = boon::Schemas::new();
    let mut compiler = boon::Compiler::new();
    let path = dir.join(format!("{name}.schema.json"));
    let idx = compiler.compile(path.to_str().unwrap(), &mut schemas).unwrap_or_else(|e| panic!("{name}: {e}"));
    if let Err(e) = schemas.validate(instance, idx) {
        panic!("{name} schema rejects output: {e:#}\n{instance:#}");
    }
}

/// Validate the envelope and the command-specific outputs.
fn check_envelope(v: &Value) {
    check_schema("envelope", v);
    let command = v["command"].as_str().unwrap();
    check_schema(command, &v["outputs"]);
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn deficiency_matches_formula() {
    let v = ok_json(&["deficiency", "--m", "2", "--p", "3", "--q", "3"]);
    check_envelope(&v);
    assert_eq!(v["outputs"]["n_formula"], 5);
    assert_eq!(v["outputs"]["n_counted"], 5);
    assert_eq!(v["outputs"]["consistent"], true);
    // lambda defaults to i
    assert_eq!(v["outputs"]["lambda"], serde_json::json!(["0", "1"]));
}

#[test]
fn deficiency_at_other_nonreal_lambda() {
    let v = ok_json(&["deficiency", "--m", "1", "--p", "1", "--lambda", "-2,1/3"]);
    assert_eq!(v["outputs"]["n_counted"], 3);
    assert_eq!(v["outputs"]["lambda"], serde_json::json!(["-2", "1/3"]));
}

#[test]
fn every_command_fits_its_schema() {
    let spec = example("m1p1q1.json");
    let bc = example("dirichlet.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["fundamental-system", "--m", "2", "--p", "1", "--q", "3", "--terms", "3"],
        vec!["forms", "--m", "2", "--p", "1", "--q", "3"],
        vec!["validate-bc", "--spec", &spec, "--bc", &bc],
        vec!["spectrum", "--spec", &spec, "--bc", &bc, "--range", "0", "20", "--points", "60"],
        vec!["discreteness", "--m", "2", "--p", "3"],
        vec!["sweep", "--m-max", "2"],
    ];
    for args in runs {
        let v = ok_json(&args);
        assert_eq!(v["command"], args[0]);
        check_envelope(&v);
    }
}

#[test]
fn discreteness_limit() {
    let v = ok_json(&["discreteness", "--m", "1", "--p", "2"]);
    assert_eq!(v["outputs"]["criterion_zero"], false);
    let v = ok_json(&["discreteness", "--m", "1", "--p", "1"]);
    assert_eq!(v["outputs"]["criterion_zero"], true);
}

// First zero of J0, from tables.
const J0_1: f64 = 2.404_825_557_695_773;

#[test]
fn dirichlet_spectrum_of_the_example() {
    let v = ok_json(&["spectrum", "--spec", &example("m1p1q1.json"), "--bc", &example("dirichlet.json"), "--range", "0", "50"]);
    let eig = v["outputs"]["eigenvalues"].as_array().unwrap();
    let first = eig[0]["lambda"].as_f64().unwrap();
    assert!((first - (J0_1 / 2.0).powi(2)).abs() < 1e-6, "{first}");
    assert!(v["diagnostics"].as_array().unwrap().is_empty());
}

#[test]
fn parallel_and_sequential_agree() {
    let args = ["spectrum", "--spec", &example("m1p1q1.json"), "--bc", &example("dirichlet.json"), "--range", "0", "30"];
    let par = ok_json(&args);
    let mut seq_args = args.to_vec();
    seq_args.push("--sequential");
    let seq = ok_json(&seq_args);
    assert_eq!(par["outputs"]["eigenvalues"], seq["outputs"]["eigenvalues"]);
    assert_eq!(par["outputs"]["scan"], seq["outputs"]["scan"]);
    assert_eq!(seq["outputs"]["config"]["mode"], "sequential");
}

#[test]
fn sweep_has_no_mismatches() {
    let v = ok_json(&["sweep"]);
    assert_eq!(v["outputs"]["mismatches"], 0);
    // (m, p, q) with p, q in 1..=2m-1 for m = 1, 2, 3
    assert_eq!(v["outputs"]["cases"], 1 + 9 + 25);
}

#[test]
fn output_is_deterministic() {
    let args = ["spectrum", "--spec", &example("m1p1q1.json"), "--bc", &example("dirichlet.json"), "--range", "0", "20"];
    assert_eq!(without_timing(ok_json(&args)), without_timing(ok_json(&args)));
    let csv_args: Vec<&str> = ["--format", "csv"].iter().copied().chain(args.iter().copied()).collect();
    assert_eq!(run(&csv_args).stdout, run(&csv_args).stdout);
}

#[test]
fn csv_is_rfc4180() {
    let out = run(&["--format", "csv", "sweep", "--m-max", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.ends_with("\r\n"));
    assert!(!text.replace("\r\n", "").contains('\n'));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(&headers[0], "m");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1 + 9);
    assert!(rows.iter().all(|r| r.len() == headers.len()));
}

#[test]
fn csv_spectrum_tables() {
    let base = ["--format", "csv", "spectrum", "--spec", &example("m1p1q1.json"), "--bc", &example("dirichlet.json"), "--range", "0", "10"];
    let eig = String::from_utf8(run(&base).stdout).unwrap();
    assert!(eig.starts_with("lambda,factor,"));
    let mut scan_args = base.to_vec();
    scan_args.extend(["--table", "scan", "--points", "11"]);
    let scan = String::from_utf8(run(&scan_args).stdout).unwrap();
    // header plus 11 points for each of the two factors
    assert_eq!(scan.lines().count(), 1 + 22);
}

#[test]
fn trunc_precedence() {
    let v: Value = serde_json::from_slice(&run_env(&["deficiency", "--m", "1", "--p", "1"], &[("SINGSPEC_TRUNC", "9")]).stdout).unwrap();
    assert_eq!(v["inputs"]["trunc"], 9);
    let out = run_env(&["deficiency", "--m", "1", "--p", "1", "--trunc", "7"], &[("SINGSPEC_TRUNC", "9")]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["inputs"]["trunc"], 7);
    let out = run_env(&["deficiency", "--m", "1", "--p", "1"], &[("SINGSPEC_TRUNC", "lots")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["deficiency", "--m", "1", "--p", "1", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["spectrum", "--m", "1", "--p", "1", "--bc", &example("dirichlet.json")]).status.code(), Some(2));
    assert_eq!(run(&["deficiency", "--m", "1"]).status.code(), Some(2));
    assert_eq!(run(&["nope"]).status.code(), Some(2));
}

#[test]
fn unknown_spec_keys_exit_2_with_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spec.json");
    std::fs::write(&path, r#"{"m": 1, "p": 1, "q": 1, "order": 4}"#).unwrap();
    let out = run(&["deficiency", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("order"), "{err}");
    assert!(err.contains("\"additionalProperties\": false"), "{err}");
}

#[test]
fn domain_errors_exit_1() {
    let out = run(&["deficiency", "--m", "1", "--p", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(out.stderr.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert_eq!(err["exit_code"], 1);
    // a(0) = 0 is not allowed
    assert_eq!(run(&["deficiency", "--m", "1", "--p", "1", "--a", "0,1"]).status.code(), Some(1));
    // real lambda for a deficiency count
    assert_eq!(run(&["deficiency", "--m", "1", "--p", "1", "--lambda", "2"]).status.code(), Some(1));
}

#[test]
fn mismatched_boundary_conditions_are_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bc.json");
    std::fs::write(&path, r#"{"a1": [[[1,0],[0,0]]], "b1": [[[0,0],[0,0]]], "b2": [[[0,0],[0,0]]], "a2": [[[0,0],[0,0]]]}"#).unwrap();
    let out = run(&["validate-bc", "--spec", &example("m1p1q1.json"), "--bc", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn example_dirichlet_is_valid() {
    let v = ok_json(&["validate-bc", "--spec", &example("m1p1q1.json"), "--bc", &example("dirichlet.json")]);
    assert_eq!(v["outputs"]["valid"], true);
    assert_eq!(v["outputs"]["context"]["n"], 3);
}

fn schema_accepts(name: &str, instance: &Value) -> bool {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let mut schemas = boon::Schemas::new();
    let idx = boon::Compiler::new().compile(path.to_str().unwrap(), &mut schemas).unwrap();
    schemas.validate(instance, idx).is_ok()
}

#[test]
fn schemas_reject_broken_outputs() {
    let mut v = ok_json(&["deficiency", "--m", "1", "--p", "1"]);
    assert!(schema_accepts("envelope", &v) && schema_accepts("deficiency", &v["outputs"]));
    v["outputs"]["n_counted"] = Value::from(-1);
    assert!(!schema_accepts("deficiency", &v["outputs"]));
    v["outputs"]["extra"] = Value::from(1);
    assert!(!schema_accepts("deficiency", &v["outputs"]));
    v.as_object_mut().unwrap().remove("versions");
    assert!(!schema_accepts("envelope", &v));
    let spec: Value = serde_json::from_str(r#"{"m": 1, "p": 1, "q": 1, "a": ["1/2", 3]}"#).unwrap();
    assert!(schema_accepts("spec-file", &spec));
    assert!(!schema_accepts("spec-file", &serde_json::json!({"m": 0, "p": 1, "q": 1})));
    let bc: Value = serde_json::from_str(&std::fs::read_to_string(example("dirichlet.json")).unwrap()).unwrap();
    assert!(schema_accepts("bc-file", &bc));
}
