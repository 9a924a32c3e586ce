use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use scenario_cli::{run, EXIT_FINDINGS, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_SYNTAX};
use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/highway")
        .join(name)
        .display()
        .to_string()
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("scenario").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn pipeline_args(out: &Path, catalog: &str) -> Vec<String> {
    vec![
        "pipeline".into(),
        fixture("car_follows_truck.scn"),
        "--vocab".into(),
        fixture("vocabulary.json"),
        "--catalog".into(),
        catalog.into(),
        "--expected".into(),
        fixture("expected.json"),
        "--duration".into(),
        "2".into(),
        "--dt".into(),
        "0.5".into(),
        "--out".into(),
        out.display().to_string(),
    ]
}

#[test]
fn validate_accepts_the_worked_example() {
    let (code, out, _) = call(&["validate", &fixture("car_follows_truck.scn"), "--vocab", &fixture("vocabulary.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("car-follows-truck"));
}

#[test]
fn unknown_term_is_a_syntax_error_naming_term_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(dir.path(), "bad.scn", "scenario x\ncar c1\nbicycle b1\n");
    let (code, _, err) = call(&["validate", &scn, "--vocab", &fixture("vocabulary.json")]);
    assert_eq!(code, EXIT_SYNTAX);
    assert!(err.contains("bicycle"), "{err}");
    assert!(err.contains("line 3"), "{err}");
    assert!(err.starts_with("error[functional]"), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let (code, _, err) = call(&["validate", "/nonexistent/x.scn", "--vocab", &fixture("vocabulary.json")]);
    assert_eq!(code, EXIT_IO);
    assert!(err.contains("/nonexistent/x.scn"));
}

#[test]
fn inconsistent_scenario_reports_findings() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(
        dir.path(),
        "loop.scn",
        "scenario loop\nroad r1 is two-lane-motorway\nr1 geometry straight\ncar c1\ncar c2\nc1 follows c2\nc2 follows c1\n",
    );
    let (code, out, _) = call(&["--json", "validate", &scn, "--vocab", &fixture("vocabulary.json")]);
    assert_eq!(code, EXIT_FINDINGS);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["status"], EXIT_FINDINGS);
    assert!(!report["files"][0]["findings"].as_array().unwrap().is_empty());
}

#[test]
fn lower_prints_the_golden_logical_scenario() {
    let (code, out, err) = call(&[
        "lower",
        &fixture("car_follows_truck.scn"),
        "--vocab",
        &fixture("vocabulary.json"),
        "--catalog",
        &fixture("catalog.json"),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out, fs::read_to_string(fixture("logical.json")).unwrap());
}

#[test]
fn stages_compose_like_the_pipeline() {
    let staged = tempfile::tempdir().unwrap();
    let piped = tempfile::tempdir().unwrap();
    let s = staged.path().display().to_string();
    let (code, _, err) = call(&[
        "lower",
        &fixture("car_follows_truck.scn"),
        "--vocab",
        &fixture("vocabulary.json"),
        "--catalog",
        &fixture("catalog.json"),
        "--out",
        &s,
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let logical = staged.path().join("car-follows-truck/logical.json");
    let (code, _, err) = call(&["concretize", &logical.display().to_string(), "--out", &s]);
    assert_eq!(code, EXIT_OK, "{err}");
    let suite = staged.path().join("car-follows-truck/suite.json");
    let (code, _, err) = call(&[
        "export",
        &suite.display().to_string(),
        "--expected",
        &fixture("expected.json"),
        "--duration",
        "2",
        "--dt",
        "0.5",
        "--out",
        &s,
    ]);
    assert_eq!(code, EXIT_OK, "{err}");

    let args = pipeline_args(piped.path(), &fixture("catalog.json"));
    let (code, _, err) = call(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(tree(staged.path()), tree(piped.path()));
}

#[test]
fn pipeline_json_summarises_each_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = pipeline_args(dir.path(), &fixture("catalog.json"));
    args.insert(0, "--json".into());
    args.extend(["--method", "random", "--n", "20", "--seed", "3"].map(String::from));
    let (code, out, err) = call(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, EXIT_OK, "{err}");
    let report: Value = serde_json::from_str(&out).unwrap();
    let s = &report["scenarios"][0];
    assert_eq!(s["scenario_id"], "car-follows-truck");
    assert_eq!(s["method"], "random");
    assert_eq!(s["scenarios"], 20);
    assert_eq!(s["test_cases"], 20);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("car-follows-truck/testcases/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["suite_hash"], s["suite_hash"]);
}

#[test]
fn duplicate_scenario_ids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = pipeline_args(dir.path(), &fixture("catalog.json"));
    args.insert(2, fixture("car_follows_truck.scn"));
    let (code, _, err) = call(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, EXIT_FINDINGS);
    assert!(err.contains("car-follows-truck"), "{err}");
}

#[test]
fn infeasible_catalog_exits_nonzero_naming_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let mut catalog: Value = serde_json::from_str(&fs::read_to_string(fixture("catalog.json")).unwrap()).unwrap();
    catalog["entities"]["car"][0]["range"] = serde_json::json!([150, 200]);
    catalog["entities"]["truck"][0]["range"] = serde_json::json!([0, 100]);
    let catalog = write(dir.path(), "catalog.json", &catalog.to_string());
    let out = dir.path().join("out");
    let args = pipeline_args(&out, &catalog);
    let (code, _, err) = call(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, EXIT_INFEASIBLE, "{err}");
    assert!(err.contains("k0"), "{err}");
    assert!(!out.join("car-follows-truck/testcases").exists());
}

#[test]
fn bad_arguments_are_rejected() {
    let (code, _, err) = call(&["concretize", "x.json", "--out", "o", "--method", "bogus"]);
    assert_eq!(code, EXIT_SYNTAX);
    assert!(err.contains("bogus"));
    let (code, _, _) = call(&["concretize", "x.json", "--out", "o", "--k", "0"]);
    assert_eq!(code, EXIT_SYNTAX);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_scenario");
    let ok = Command::new(bin)
        .args(["validate", &fixture("car_follows_truck.scn"), "--vocab", &fixture("vocabulary.json")])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let missing = Command::new(bin)
        .args(["validate", "/nonexistent.scn", "--vocab", &fixture("vocabulary.json")])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(EXIT_IO));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error[io]"));
}

/// Relative path and contents of every file under `root`.
fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}
