//! Concrete scenarios → executable test cases and exported suites.
//!
//! A test case carries six items: a unique id, the work product under
//! test, preconditions and configuration, environmental conditions, input
//! time series, and the expected behaviour with tolerances.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;
use crate::concretize::{check_concrete, ConcreteScenario, ConcretizeError, Violation};
use crate::error::FormatError;
use crate::expr::Comparator;
use crate::logical::{LogicalScenario, ParameterKind, SourceRef};

pub const FORMAT: &str = "testcase/1";
pub const MANIFEST_FORMAT: &str = "manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// The six mandatory items, as the JSON keys that carry them.
pub const ISO_FIELDS: [&str; 6] = [
    "unique_id",
    "work_product_ref",
    "preconditions",
    "environmental_conditions",
    "input_data",
    "expected",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TestcaseError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Concretize(#[from] ConcretizeError),
    #[error("scenario is not a valid point of its logical scenario: {}", list(.violations))]
    InvalidScenario { violations: Vec<Violation> },
    #[error("bad timing: need 0 < dt <= duration, got dt={dt}, duration={duration}")]
    BadTiming { duration: f64, dt: f64 },
    #[error("vehicle `{instance}` lacks {missing}")]
    MissingKinematicInputs { instance: String, missing: String },
    #[error("test case field `{field}` is missing or empty")]
    IncompleteField { field: String },
    #[error("check on `{signal}`: tolerance must be finite and >= 0")]
    BadTolerance { signal: String },
    #[error("traces do not match the scenario: {reason}")]
    TraceMismatch { reason: String },
    #[error("duplicate test case id `{id}`")]
    DuplicateId { id: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn list(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn io_error(path: &Path, e: std::io::Error) -> TestcaseError {
    TestcaseError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSeries {
    pub parameter: String,
    pub unit: String,
    pub dt: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub signal: String,
    pub comparator: Comparator,
    pub bound: f64,
    /// Acceptable deviation past `bound`.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedBehavior {
    pub description: String,
    pub checks: Vec<Check>,
}

impl ExpectedBehavior {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        canon::from_tree(canon::parse_json(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestMeta {
    pub work_product_ref: String,
    pub preconditions: String,
    pub configuration: String,
}

/// Authored input for a suite: `meta` and `expected` in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub work_product_ref: String,
    pub preconditions: String,
    pub configuration: String,
    pub description: String,
    pub checks: Vec<Check>,
}

impl TestSpec {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        canon::from_tree(canon::parse_json(text)?)
    }

    pub fn meta(&self) -> TestMeta {
        TestMeta {
            work_product_ref: self.work_product_ref.clone(),
            preconditions: self.preconditions.clone(),
            configuration: self.configuration.clone(),
        }
    }

    pub fn expected(&self) -> ExpectedBehavior {
        ExpectedBehavior {
            description: self.description.clone(),
            checks: self.checks.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preconditions {
    pub text: String,
    pub configuration: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub unique_id: String,
    pub work_product_ref: String,
    pub preconditions: Preconditions,
    pub environmental_conditions: BTreeMap<String, f64>,
    pub input_data: Vec<TimeSeries>,
    pub expected: ExpectedBehavior,
    pub source_ref: SourceRef,
}

impl TestCase {
    pub fn to_canonical_json(&self) -> Result<String, FormatError> {
        let mut tree = serde_json::to_value(self).map_err(|e| FormatError::Encode(e.to_string()))?;
        tree["format"] = FORMAT.into();
        canon::to_canonical_string(&tree)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let mut tree = canon::parse_json(text)?;
        canon::expect_format(&tree, FORMAT)?;
        tree.as_object_mut().map(|o| o.remove("format"));
        canon::from_tree(tree)
    }

    pub fn content_hash(&self) -> Result<String, FormatError> {
        Ok(canon::sha256_hex(self.to_canonical_json()?.as_bytes()))
    }

    /// Assignments read back from the t = 0 samples of the input data.
    pub fn initial_assignments(&self) -> BTreeMap<String, f64> {
        self.input_data
            .iter()
            .filter_map(|ts| Some((recovered_name(&ts.parameter), *ts.samples.first()?)))
            .collect()
    }
}

const POSITION: &str = "s";
const SPEED: &str = "v";

/// Parameter a trace starts from: `c1.s` from `c1.s0`, `c1.v` from `c1.v0`,
/// anything else from itself.
fn recovered_name(trace: &str) -> String {
    match trace.rsplit_once('.') {
        Some((instance, POSITION)) => format!("{instance}.s0"),
        Some((instance, SPEED)) => format!("{instance}.v0"),
        _ => trace.to_string(),
    }
}

/// Number of samples at t = 0, dt, 2dt, … up to `duration`.
pub fn sample_count(duration: f64, dt: f64) -> usize {
    ((duration / dt) + 1e-9).floor() as usize + 1
}

/// Input time series for a concrete scenario.
///
/// Instances with scalar-initial parameters are vehicles: `s0` becomes the
/// position series `<id>.s` with s(t) = s0 + v0·t, `v0` the constant speed
/// series `<id>.v`. Every other parameter becomes a constant series under
/// its own name. Series follow the logical scenario's parameter order.
pub fn synthesize_traces(
    ls: &LogicalScenario,
    cs: &ConcreteScenario,
    duration: f64,
    dt: f64,
) -> Result<Vec<TimeSeries>, TestcaseError> {
    if !(dt > 0.0 && duration.is_finite() && dt <= duration) {
        return Err(TestcaseError::BadTiming { duration, dt });
    }
    let violations = check_concrete(ls, cs)?;
    if !violations.is_empty() {
        return Err(TestcaseError::InvalidScenario { violations });
    }

    let vehicles: BTreeSet<&str> = ls
        .parameters
        .iter()
        .filter(|p| p.kind == ParameterKind::ScalarInitial)
        .filter_map(|p| p.split_name().map(|(instance, _)| instance))
        .collect();
    for vehicle in &vehicles {
        let missing: Vec<&str> = ["s0", "v0"]
            .into_iter()
            .filter(|local| ls.parameter(&format!("{vehicle}.{local}")).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(TestcaseError::MissingKinematicInputs {
                instance: vehicle.to_string(),
                missing: missing.join(" and "),
            });
        }
    }

    let count = sample_count(duration, dt);
    let value = |name: &str| cs.assignments[name];
    Ok(ls
        .parameters
        .iter()
        .map(|p| {
            let x = value(&p.name);
            match p.split_name() {
                Some((instance, "s0")) if vehicles.contains(instance) => {
                    let v0 = value(&format!("{instance}.v0"));
                    TimeSeries {
                        parameter: format!("{instance}.{POSITION}"),
                        unit: p.unit.clone(),
                        dt,
                        samples: (0..count).map(|i| x + v0 * (i as f64 * dt)).collect(),
                    }
                }
                Some((instance, "v0")) if vehicles.contains(instance) => TimeSeries {
                    parameter: format!("{instance}.{SPEED}"),
                    unit: p.unit.clone(),
                    dt,
                    samples: vec![x; count],
                },
                _ => TimeSeries {
                    parameter: p.name.clone(),
                    unit: p.unit.clone(),
                    dt,
                    samples: vec![x; count],
                },
            }
        })
        .collect())
}

fn require(field: &str, text: &str) -> Result<(), TestcaseError> {
    if text.trim().is_empty() {
        return Err(TestcaseError::IncompleteField {
            field: field.to_string(),
        });
    }
    Ok(())
}

fn check_traces(cs: &ConcreteScenario, traces: &[TimeSeries]) -> Result<(), TestcaseError> {
    let mismatch = |reason: String| Err(TestcaseError::TraceMismatch { reason });
    let Some(first) = traces.first() else {
        return Err(TestcaseError::IncompleteField {
            field: "input_data".into(),
        });
    };
    let mut seen = BTreeSet::new();
    for ts in traces {
        if !seen.insert(ts.parameter.as_str()) {
            return mismatch(format!("`{}` appears twice", ts.parameter));
        }
        if ts.dt != first.dt || ts.samples.len() != first.samples.len() || ts.samples.is_empty() {
            return mismatch(format!("`{}` does not share dt and length", ts.parameter));
        }
        let source = recovered_name(&ts.parameter);
        match cs.assignments.get(&source) {
            Some(x) if *x == ts.samples[0] => {}
            Some(x) => {
                return mismatch(format!(
                    "`{}` starts at {:?}, but `{source}` = {x:?}",
                    ts.parameter, ts.samples[0]
                ))
            }
            None => return mismatch(format!("`{}` has no source assignment", ts.parameter)),
        }
    }
    Ok(())
}

/// Build a test case. Its id is `tc-` plus the first 16 hex digits of the
/// SHA-256 over the scenario hash, `meta` and `expected`.
///
/// Environmental conditions are the scenario's scalar-static parameters.
pub fn assemble_test_case(
    ls: &LogicalScenario,
    cs: &ConcreteScenario,
    traces: Vec<TimeSeries>,
    meta: &TestMeta,
    expected: &ExpectedBehavior,
) -> Result<TestCase, TestcaseError> {
    require("work_product_ref", &meta.work_product_ref)?;
    require("preconditions", &meta.preconditions)?;
    require("configuration", &meta.configuration)?;
    require("expected.description", &expected.description)?;
    if expected.checks.is_empty() {
        return Err(TestcaseError::IncompleteField {
            field: "expected.checks".into(),
        });
    }
    for check in &expected.checks {
        require("expected.checks.signal", &check.signal)?;
        if !(check.tolerance >= 0.0 && check.tolerance.is_finite() && check.bound.is_finite()) {
            return Err(TestcaseError::BadTolerance {
                signal: check.signal.clone(),
            });
        }
    }
    check_traces(cs, &traces)?;

    let environmental_conditions: BTreeMap<String, f64> = ls
        .parameters
        .iter()
        .filter(|p| p.kind == ParameterKind::ScalarStatic)
        .filter_map(|p| Some((p.name.clone(), *cs.assignments.get(&p.name)?)))
        .collect();
    if environmental_conditions.is_empty() {
        return Err(TestcaseError::IncompleteField {
            field: "environmental_conditions".into(),
        });
    }

    let source_ref = cs.source()?;
    let identity = serde_json::json!({
        "scenario_hash": source_ref.hash,
        "meta": meta,
        "expected": expected,
    });
    let digest = canon::content_hash(&identity)?;
    Ok(TestCase {
        unique_id: format!("tc-{}", &digest[..16]),
        work_product_ref: meta.work_product_ref.clone(),
        preconditions: Preconditions {
            text: meta.preconditions.clone(),
            configuration: meta.configuration.clone(),
        },
        environmental_conditions,
        input_data: traces,
        expected: expected.clone(),
        source_ref,
    })
}

/// Which of the six items an exported test case document lacks or leaves
/// empty.
pub fn missing_iso_fields(doc: &serde_json::Value) -> Vec<&'static str> {
    use serde_json::Value;
    let filled = |v: Option<&Value>| match v {
        Some(Value::String(s)) => !s.trim().is_empty(),
        Some(Value::Array(a)) => !a.is_empty(),
        Some(Value::Object(o)) => !o.is_empty(),
        Some(Value::Number(_)) | Some(Value::Bool(_)) => true,
        _ => false,
    };
    let mut out = Vec::new();
    for field in ISO_FIELDS {
        let value = doc.get(field);
        let ok = match field {
            "preconditions" => {
                filled(value.and_then(|v| v.get("text")))
                    && filled(value.and_then(|v| v.get("configuration")))
            }
            "input_data" => {
                filled(value)
                    && value.and_then(Value::as_array).is_some_and(|series| {
                        series.iter().all(|s| filled(s.get("samples")) && filled(s.get("dt")))
                    })
            }
            "expected" => {
                filled(value.and_then(|v| v.get("description")))
                    && value
                        .and_then(|v| v.get("checks"))
                        .and_then(Value::as_array)
                        .is_some_and(|checks| {
                            !checks.is_empty() && checks.iter().all(|c| filled(c.get("tolerance")))
                        })
            }
            _ => filled(value),
        };
        if !ok {
            out.push(field);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub unique_id: String,
    pub file: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub case_count: usize,
    pub cases: Vec<ManifestEntry>,
    /// SHA-256 over the sorted case hashes, one per line.
    pub suite_hash: String,
}

impl Manifest {
    pub fn to_canonical_json(&self) -> Result<String, FormatError> {
        let mut tree = serde_json::to_value(self).map_err(|e| FormatError::Encode(e.to_string()))?;
        tree["format"] = MANIFEST_FORMAT.into();
        canon::to_canonical_string(&tree)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let mut tree = canon::parse_json(text)?;
        canon::expect_format(&tree, MANIFEST_FORMAT)?;
        tree.as_object_mut().map(|o| o.remove("format"));
        canon::from_tree(tree)
    }
}

fn staging_path(destination: &Path) -> PathBuf {
    let name = destination
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "suite".into());
    destination.with_file_name(format!(".{name}.staging"))
}

/// Write one file per case plus `manifest.json` into `destination`,
/// replacing it as a whole. Files are written to a sibling staging
/// directory first and renamed into place.
pub fn export_suite(cases: &[TestCase], destination: &Path) -> Result<Manifest, TestcaseError> {
    let mut ids = BTreeSet::new();
    for case in cases {
        if !ids.insert(case.unique_id.as_str()) {
            return Err(TestcaseError::DuplicateId {
                id: case.unique_id.clone(),
            });
        }
    }

    let mut rendered: Vec<(String, String, String)> = cases
        .iter()
        .map(|case| {
            let text = case.to_canonical_json()?;
            let hash = canon::sha256_hex(text.as_bytes());
            Ok((case.unique_id.clone(), text, hash))
        })
        .collect::<Result<_, TestcaseError>>()?;
    rendered.sort_by(|a, b| a.0.cmp(&b.0));

    let mut sorted_hashes: Vec<&str> = rendered.iter().map(|r| r.2.as_str()).collect();
    sorted_hashes.sort_unstable();
    let manifest = Manifest {
        case_count: rendered.len(),
        cases: rendered
            .iter()
            .map(|(id, _, hash)| ManifestEntry {
                unique_id: id.clone(),
                file: format!("{id}.json"),
                hash: hash.clone(),
            })
            .collect(),
        suite_hash: canon::sha256_hex(sorted_hashes.join("\n").as_bytes()),
    };

    if let Some(parent) = destination.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    let staging = staging_path(destination);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| io_error(&staging, e))?;
    }
    fs::create_dir(&staging).map_err(|e| io_error(&staging, e))?;
    let write = |name: &str, text: &str| {
        let path = staging.join(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    };
    let staged = rendered
        .iter()
        .try_for_each(|(id, text, _)| write(&format!("{id}.json"), text))
        .and_then(|_| write(MANIFEST_FILE, &manifest.to_canonical_json()?));
    if let Err(e) = staged {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if destination.exists() {
        fs::remove_dir_all(destination).map_err(|e| io_error(destination, e))?;
    }
    fs::rename(&staging, destination).map_err(|e| io_error(destination, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concretize::Method;
    use crate::expr::Inequality;
    use crate::logical::{Constraint, ConstraintForm, Parameter, Provenance, Range};

    fn param(name: &str, unit: &str, lo: f64, hi: f64, kind: ParameterKind) -> Parameter {
        Parameter {
            name: name.into(),
            unit: unit.into(),
            range: Range::new(lo, hi),
            distribution: None,
            kind,
            provenance: Provenance::Instance {
                instance: name.split('.').next().unwrap().into(),
                term: "car".into(),
            },
        }
    }

    fn fixture() -> (LogicalScenario, ConcreteScenario) {
        use ParameterKind::*;
        let ls = LogicalScenario {
            scenario_id: "s1".into(),
            source_ref: SourceRef {
                id: "s1".into(),
                hash: "0".repeat(64),
            },
            parameters: vec![
                param("r1.lane_width", "m", 2.5, 3.5, ScalarStatic),
                param("c1.s0", "m", 0.0, 200.0, ScalarInitial),
                param("c1.v0", "m/s", 0.0, 40.0, ScalarInitial),
                param("t1.s0", "m", 0.0, 200.0, ScalarInitial),
                param("t1.v0", "m/s", 0.0, 40.0, ScalarInitial),
            ],
            constraints: vec![Constraint {
                id: "k0".into(),
                form: ConstraintForm::Inequality(Inequality::parse("t1.s0 > c1.s0").unwrap()),
                provenance: Provenance::Relation {
                    relation: "follows".into(),
                    arguments: vec!["c1".into(), "t1".into()],
                },
            }],
        };
        let cs = ConcreteScenario {
            scenario_id: "s1-pairwise-0".into(),
            source_ref: ls.source().unwrap(),
            assignments: BTreeMap::from([
                ("r1.lane_width".into(), 3.5),
                ("c1.s0".into(), 0.0),
                ("c1.v0".into(), 25.0),
                ("t1.s0".into(), 80.0),
                ("t1.v0".into(), 0.0),
            ]),
            method: Method::Pairwise,
            seed: None,
            default_uniform: vec![],
        };
        (ls, cs)
    }

    fn meta() -> TestMeta {
        TestMeta {
            work_product_ref: "highway pilot item definition".into(),
            preconditions: "system active, driver hands on".into(),
            configuration: "sil-default".into(),
        }
    }

    fn expected() -> ExpectedBehavior {
        ExpectedBehavior {
            description: "c1 keeps distance > d_min to t1".into(),
            checks: vec![Check {
                signal: "t1.s - c1.s".into(),
                comparator: Comparator::Gt,
                bound: 20.0,
                tolerance: 0.0,
            }],
        }
    }

    fn samples<'a>(traces: &'a [TimeSeries], name: &str) -> &'a [f64] {
        &traces.iter().find(|t| t.parameter == name).unwrap().samples
    }

    #[test]
    fn traces_follow_constant_velocity() {
        let (ls, cs) = fixture();
        let traces = synthesize_traces(&ls, &cs, 2.0, 1.0).unwrap();
        assert_eq!(samples(&traces, "c1.s"), [0.0, 25.0, 50.0]);
        assert_eq!(samples(&traces, "t1.s"), [80.0, 80.0, 80.0]);
        assert_eq!(samples(&traces, "c1.v"), [25.0, 25.0, 25.0]);
        assert_eq!(samples(&traces, "r1.lane_width"), [3.5, 3.5, 3.5]);
        assert_eq!(traces.len(), 5);
    }

    #[test]
    fn sample_count_tolerates_inexact_steps() {
        assert_eq!(sample_count(2.0, 1.0), 3);
        assert_eq!(sample_count(1.0, 0.1), 11);
        assert_eq!(sample_count(0.3, 0.1), 4);
        assert_eq!(sample_count(1.0, 0.3), 4);
    }

    #[test]
    fn timing_and_kinematic_errors() {
        let (mut ls, mut cs) = fixture();
        for (duration, dt) in [(2.0, 0.0), (2.0, -1.0), (1.0, 2.0), (2.0, f64::NAN)] {
            assert!(matches!(
                synthesize_traces(&ls, &cs, duration, dt),
                Err(TestcaseError::BadTiming { .. })
            ));
        }
        ls.parameters.retain(|p| p.name != "t1.v0");
        cs.assignments.remove("t1.v0");
        cs.source_ref = ls.source().unwrap();
        assert_eq!(
            synthesize_traces(&ls, &cs, 2.0, 1.0),
            Err(TestcaseError::MissingKinematicInputs {
                instance: "t1".into(),
                missing: "v0".into()
            })
        );
    }

    #[test]
    fn rejects_inconsistent_scenarios() {
        let (ls, mut cs) = fixture();
        cs.assignments.insert("c1.s0".into(), 90.0);
        assert!(matches!(
            synthesize_traces(&ls, &cs, 2.0, 1.0),
            Err(TestcaseError::InvalidScenario { .. })
        ));
    }

    #[test]
    fn assembled_case_has_all_fields_and_stable_id() {
        let (ls, cs) = fixture();
        let traces = synthesize_traces(&ls, &cs, 2.0, 1.0).unwrap();
        let tc = assemble_test_case(&ls, &cs, traces.clone(), &meta(), &expected()).unwrap();
        let again = assemble_test_case(&ls, &cs, traces, &meta(), &expected()).unwrap();
        assert_eq!(tc.unique_id, again.unique_id);
        assert!(tc.unique_id.starts_with("tc-") && tc.unique_id.len() == 19);
        let doc: serde_json::Value = serde_json::from_str(&tc.to_canonical_json().unwrap()).unwrap();
        assert!(missing_iso_fields(&doc).is_empty());
        assert_eq!(
            tc.environmental_conditions,
            BTreeMap::from([("r1.lane_width".to_string(), 3.5)])
        );
        assert_eq!(tc.initial_assignments(), cs.assignments);
        assert_eq!(TestCase::from_json(&tc.to_canonical_json().unwrap()).unwrap(), tc);
    }

    #[test]
    fn incomplete_or_mismatched_inputs() {
        let (ls, cs) = fixture();
        let traces = synthesize_traces(&ls, &cs, 2.0, 1.0).unwrap();
        let mut m = meta();
        m.work_product_ref = " ".into();
        assert_eq!(
            assemble_test_case(&ls, &cs, traces.clone(), &m, &expected()),
            Err(TestcaseError::IncompleteField {
                field: "work_product_ref".into()
            })
        );
        assert!(matches!(
            assemble_test_case(&ls, &cs, vec![], &meta(), &expected()),
            Err(TestcaseError::IncompleteField { .. })
        ));
        let mut e = expected();
        e.checks[0].tolerance = -1.0;
        assert!(matches!(
            assemble_test_case(&ls, &cs, traces.clone(), &meta(), &e),
            Err(TestcaseError::BadTolerance { .. })
        ));
        let mut shifted = traces.clone();
        shifted[1].samples[0] += 1.0;
        assert!(matches!(
            assemble_test_case(&ls, &cs, shifted, &meta(), &expected()),
            Err(TestcaseError::TraceMismatch { .. })
        ));
        let mut short = traces;
        short[0].samples.pop();
        assert!(matches!(
            assemble_test_case(&ls, &cs, short, &meta(), &expected()),
            Err(TestcaseError::TraceMismatch { .. })
        ));
    }

    #[test]
    fn validator_spots_omissions() {
        let (ls, cs) = fixture();
        let traces = synthesize_traces(&ls, &cs, 2.0, 1.0).unwrap();
        let tc = assemble_test_case(&ls, &cs, traces, &meta(), &expected()).unwrap();
        let mut doc = serde_json::to_value(&tc).unwrap();
        doc["expected"]["checks"] = serde_json::json!([]);
        doc.as_object_mut().unwrap().remove("work_product_ref");
        assert_eq!(missing_iso_fields(&doc), ["work_product_ref", "expected"]);
    }

    #[test]
    fn export_writes_cases_and_manifest() {
        let (ls, cs) = fixture();
        let traces = synthesize_traces(&ls, &cs, 2.0, 1.0).unwrap();
        let cases: Vec<TestCase> = ["a", "b", "c"]
            .iter()
            .map(|config| {
                let mut m = meta();
                m.configuration = config.to_string();
                assemble_test_case(&ls, &cs, traces.clone(), &m, &expected()).unwrap()
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let dest = dir.path().join("suite");
        let manifest = export_suite(&cases, &dest).unwrap();
        assert_eq!(manifest.case_count, 3);
        assert_eq!(fs::read_dir(&dest).unwrap().count(), 4);
        let first = fs::read(dest.join(MANIFEST_FILE)).unwrap();
        export_suite(&cases, &dest).unwrap();
        assert_eq!(fs::read(dest.join(MANIFEST_FILE)).unwrap(), first);
        let text = fs::read_to_string(dest.join(MANIFEST_FILE)).unwrap();
        assert_eq!(Manifest::from_json(&text).unwrap(), manifest);

        let dup_dest = dir.path().join("dup");
        let dup = vec![cases[0].clone(), cases[0].clone()];
        assert!(matches!(
            export_suite(&dup, &dup_dest),
            Err(TestcaseError::DuplicateId { .. })
        ));
        assert!(!dup_dest.exists());

        let empty = export_suite(&[], &dir.path().join("empty")).unwrap();
        assert_eq!(empty.case_count, 0);
        assert!(dir.path().join("empty").join(MANIFEST_FILE).exists());
    }
}
