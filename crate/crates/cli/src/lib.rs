//! The `scenario` command: validate, lower, concretize and export driving
//! scenarios, one stage at a time or as a single pipeline.
//!
//! Exit codes: 0 ok, 1 findings, 2 I/O, 3 syntax, 4 infeasible, 5 internal.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use scenario_core::concretize::{self, ConcretizeError, Strategy, Suite};
use scenario_core::error::FormatError;
use scenario_core::functional::{check_consistency, parse_functional, FunctionalError, FunctionalScenario};
use scenario_core::logical::{self, validate_logical, LogicalScenario, ValidationCode};
use scenario_core::lowering::{self, LoweringError, ParameterCatalog};
use scenario_core::testcase::{self, TestSpec, TestcaseError};
use scenario_core::vocabulary::{self, Vocabulary, VocabularyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_SYNTAX: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "scenario", version, about = "Functional → logical → concrete scenario pipeline")]
pub struct Cli {
    /// Print a machine-readable JSON report on standard output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and consistency-check functional scenario files.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Lower one functional scenario to a logical scenario.
    Lower {
        path: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        /// Write `<out>/<scenario>/logical.json` instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive concrete scenarios from a logical scenario file.
    Concretize {
        logical: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a suite file into exported test cases.
    Export {
        suite: PathBuf,
        /// Logical scenario of the suite; defaults to `logical.json` next
        /// to the suite file.
        #[arg(long)]
        logical: Option<PathBuf>,
        #[arg(long)]
        expected: PathBuf,
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage for each functional scenario file.
    Pipeline {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        expected: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Boundary,
    Equivalence,
    Pairwise,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value_t = MethodName::Pairwise)]
    pub method: MethodName,
    /// Equivalence classes per parameter (equivalence, pairwise).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    /// Number of random scenarios.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl MethodArgs {
    pub fn strategy(&self) -> Strategy {
        let k = self.k as usize;
        match self.method {
            MethodName::Boundary => Strategy::Boundary,
            MethodName::Equivalence => Strategy::Equivalence { k },
            MethodName::Pairwise => Strategy::Pairwise { k },
            MethodName::Random => Strategy::Random {
                n: self.n,
                seed: self.seed,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    /// Trace length in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    /// Trace step in seconds.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
}

/// A failure with the stage it came from and its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub module: &'static str,
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(module: &'static str, code: i32, message: impl Into<String>) -> Self {
        Failure {
            module,
            code,
            message: message.into(),
        }
    }

    fn to_json(&self) -> Value {
        json!({"module": self.module, "exit": self.code, "message": self.message})
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::new("io", EXIT_IO, format!("{}: {e}", path.display()))
}

fn format_code(e: &FormatError) -> i32 {
    match e {
        FormatError::Encode(_) => EXIT_INTERNAL,
        _ => EXIT_SYNTAX,
    }
}

fn from_vocabulary(path: &Path, e: VocabularyError) -> Failure {
    Failure::new("vocabulary", EXIT_SYNTAX, format!("{}: {e}", path.display()))
}

fn from_functional(path: &Path, e: FunctionalError) -> Failure {
    let code = match &e {
        FunctionalError::Format(f) => format_code(f),
        _ => EXIT_SYNTAX,
    };
    Failure::new("functional", code, format!("{}: {e}", path.display()))
}

fn from_lowering(path: &Path, e: LoweringError) -> Failure {
    let code = match &e {
        LoweringError::Format(FormatError::Encode(_)) => EXIT_INTERNAL,
        LoweringError::Format(_)
        | LoweringError::VocabularyMismatch { .. }
        | LoweringError::UnknownTerm { .. }
        | LoweringError::BadRange { .. }
        | LoweringError::BadDistribution { .. }
        | LoweringError::UnboundConstraintParameter { .. }
        | LoweringError::InvalidTemplate { .. } => EXIT_SYNTAX,
        LoweringError::MissingTemplate { .. }
        | LoweringError::ConstraintInstantiation { .. }
        | LoweringError::OverrideWidensRange { .. } => EXIT_FINDINGS,
    };
    Failure::new("lowering", code, format!("{}: {e}", path.display()))
}

fn from_concretize(e: ConcretizeError) -> Failure {
    let code = match &e {
        ConcretizeError::InfeasibleLevels { .. } | ConcretizeError::SamplingExhausted { .. } => EXIT_INFEASIBLE,
        ConcretizeError::Format(f) => format_code(f),
        ConcretizeError::SourceMismatch { .. } => EXIT_SYNTAX,
        _ => EXIT_INTERNAL,
    };
    Failure::new("concretize", code, e.to_string())
}

fn from_testcase(e: TestcaseError) -> Failure {
    let code = match &e {
        TestcaseError::Io { .. } => EXIT_IO,
        TestcaseError::Format(f) => format_code(f),
        TestcaseError::Concretize(_) | TestcaseError::InvalidScenario { .. } | TestcaseError::TraceMismatch { .. } => {
            EXIT_INTERNAL
        }
        TestcaseError::DuplicateId { .. } => EXIT_INTERNAL,
        TestcaseError::BadTiming { .. }
        | TestcaseError::MissingKinematicInputs { .. }
        | TestcaseError::IncompleteField { .. }
        | TestcaseError::BadTolerance { .. } => EXIT_SYNTAX,
    };
    Failure::new("testcase", code, e.to_string())
}

fn encode(module: &'static str, e: FormatError) -> Failure {
    Failure::new(module, format_code(&e), e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io(path, e))
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary, Failure> {
    vocabulary::load_vocabulary(&read(path)?).map_err(|e| from_vocabulary(path, e))
}

pub fn load_catalog(path: &Path, v: &Vocabulary) -> Result<ParameterCatalog, Failure> {
    lowering::load_parameter_catalog(&read(path)?, v).map_err(|e| from_lowering(path, e))
}

pub fn load_scenario(path: &Path, v: &Vocabulary) -> Result<FunctionalScenario, Failure> {
    parse_functional(&read(path)?, v).map_err(|e| from_functional(path, e))
}

fn load_spec(path: &Path) -> Result<TestSpec, Failure> {
    TestSpec::from_json(&read(path)?)
        .map_err(|e| Failure::new("testcase", format_code(&e), format!("{}: {e}", path.display())))
}

/// Consistency-check a parsed scenario; findings are a failure.
fn check(path: &Path, fs: &FunctionalScenario, v: &Vocabulary) -> Result<(), Failure> {
    let report = check_consistency(fs, v);
    if report.is_consistent() {
        return Ok(());
    }
    let lines: Vec<String> = report
        .findings
        .iter()
        .map(|f| format!("{:?}: {}", f.code, f.message))
        .collect();
    Err(Failure::new(
        "functional",
        EXIT_FINDINGS,
        format!("{}: inconsistent scenario `{}`: {}", path.display(), fs.scenario_id, lines.join("; ")),
    ))
}

/// Validate a logical scenario; interval infeasibility exits 4, any other
/// finding 1.
fn validate(ls: &LogicalScenario) -> Result<(), Failure> {
    let report = validate_logical(ls);
    if report.is_valid() {
        return Ok(());
    }
    let code = if report.has(ValidationCode::IntervalInfeasible) {
        EXIT_INFEASIBLE
    } else {
        EXIT_FINDINGS
    };
    let lines: Vec<String> = report
        .findings
        .iter()
        .map(|f| format!("{:?} [{}]: {}", f.code, f.elements.join(", "), f.message))
        .collect();
    Err(Failure::new(
        "logical",
        code,
        format!("logical scenario `{}`: {}", ls.scenario_id, lines.join("; ")),
    ))
}

fn scenario_dir(out: &Path, scenario_id: &str) -> PathBuf {
    out.join(scenario_id)
}

fn write_logical(out: &Path, ls: &LogicalScenario) -> Result<PathBuf, Failure> {
    let path = scenario_dir(out, &ls.scenario_id).join("logical.json");
    write(&path, &logical::serialize_logical(ls).map_err(|e| encode("logical", e))?)?;
    Ok(path)
}

/// Write `suite.json`, `coverage.json` and `concrete/<id>.json`.
fn write_suite(out: &Path, ls: &LogicalScenario, suite: &Suite) -> Result<PathBuf, Failure> {
    let dir = scenario_dir(out, &ls.scenario_id);
    let concrete = dir.join("concrete");
    if concrete.exists() {
        fs::remove_dir_all(&concrete).map_err(|e| io(&concrete, e))?;
    }
    for cs in &suite.scenarios {
        let text = cs.to_canonical_json().map_err(|e| encode("concretize", e))?;
        write(&concrete.join(format!("{}.json", cs.scenario_id)), &text)?;
    }
    let coverage = scenario_core::canon::to_canonical_string(&suite.coverage).map_err(|e| encode("concretize", e))?;
    write(&dir.join("coverage.json"), &coverage)?;
    let path = dir.join("suite.json");
    write(&path, &suite.to_canonical_json().map_err(|e| encode("concretize", e))?)?;
    Ok(path)
}

fn export(
    out: &Path,
    ls: &LogicalScenario,
    suite: &Suite,
    spec: &TestSpec,
    trace: &TraceArgs,
) -> Result<testcase::Manifest, Failure> {
    if suite.source_ref != ls.source().map_err(|e| encode("logical", e))? {
        return Err(from_concretize(ConcretizeError::SourceMismatch {
            expected: ls.scenario_id.clone(),
            found: suite.source_ref.id.clone(),
        }));
    }
    let (meta, expected) = (spec.meta(), spec.expected());
    let cases = suite
        .scenarios
        .iter()
        .map(|cs| {
            let traces = testcase::synthesize_traces(ls, cs, trace.duration, trace.dt)?;
            testcase::assemble_test_case(ls, cs, traces, &meta, &expected)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(from_testcase)?;
    testcase::export_suite(&cases, &scenario_dir(out, &ls.scenario_id).join("testcases")).map_err(from_testcase)
}

/// Result of a command: exit code, human lines, and the JSON report.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub lines: Vec<String>,
    pub report: Value,
}

impl Outcome {
    fn failed(failure: Failure) -> Self {
        Outcome {
            code: failure.code,
            lines: vec![format!("error[{}]: {}", failure.module, failure.message)],
            report: json!({"status": failure.code, "error": failure.to_json()}),
        }
    }
}

fn cmd_validate(paths: &[PathBuf], vocab: &Path) -> Outcome {
    let v = match load_vocabulary(vocab) {
        Ok(v) => v,
        Err(f) => return Outcome::failed(f),
    };
    let mut code = EXIT_OK;
    let mut lines = Vec::new();
    let mut files = Vec::new();
    for path in paths {
        let shown = path.display().to_string();
        match load_scenario(path, &v) {
            Ok(fs) => {
                let report = check_consistency(&fs, &v);
                if report.is_consistent() {
                    lines.push(format!("ok {shown}: scenario `{}`", fs.scenario_id));
                } else {
                    code = code.max(EXIT_FINDINGS);
                    for f in &report.findings {
                        lines.push(format!("{shown}: {:?}: {}", f.code, f.message));
                    }
                }
                files.push(json!({"path": shown, "scenario_id": fs.scenario_id, "findings": report.findings}));
            }
            Err(f) => {
                code = code.max(f.code);
                lines.push(format!("error[{}]: {}", f.module, f.message));
                files.push(json!({"path": shown, "error": f.to_json()}));
            }
        }
    }
    Outcome {
        code,
        lines,
        report: json!({"status": code, "files": files}),
    }
}

fn cmd_lower(path: &Path, vocab: &Path, catalog: &Path, out: Option<&Path>) -> Result<Outcome, Failure> {
    let v = load_vocabulary(vocab)?;
    let cat = load_catalog(catalog, &v)?;
    let fs = load_scenario(path, &v)?;
    check(path, &fs, &v)?;
    let ls = lowering::lower_to_logical(&fs, &cat).map_err(|e| from_lowering(path, e))?;
    validate(&ls)?;
    let summary = format!(
        "{}: {} parameters, {} constraints",
        ls.scenario_id,
        ls.parameters.len(),
        ls.constraints.len()
    );
    let (lines, written) = match out {
        Some(out) => {
            let written = write_logical(out, &ls)?;
            (vec![format!("{summary} -> {}", written.display())], Some(written))
        }
        None => (
            vec![logical::serialize_logical(&ls).map_err(|e| encode("logical", e))?.trim_end().to_string()],
            None,
        ),
    };
    Ok(Outcome {
        code: EXIT_OK,
        lines,
        report: json!({
            "status": EXIT_OK,
            "scenario_id": ls.scenario_id,
            "parameters": ls.parameters.len(),
            "constraints": ls.constraints.len(),
            "output": written.map(|p| p.display().to_string()),
        }),
    })
}

fn suite_summary(ls: &LogicalScenario, suite: &Suite) -> Value {
    json!({
        "scenario_id": ls.scenario_id,
        "method": suite.method,
        "scenarios": suite.scenarios.len(),
        "coverage": suite.coverage,
    })
}

fn cmd_concretize(logical_path: &Path, method: &MethodArgs, out: &Path) -> Result<Outcome, Failure> {
    let ls = logical::deserialize_logical(&read(logical_path)?)
        .map_err(|e| Failure::new("logical", format_code(&e), format!("{}: {e}", logical_path.display())))?;
    validate(&ls)?;
    let suite = concretize::generate_suite(&ls, method.strategy()).map_err(from_concretize)?;
    let written = write_suite(out, &ls, &suite)?;
    let mut report = suite_summary(&ls, &suite);
    report["status"] = EXIT_OK.into();
    report["output"] = written.display().to_string().into();
    Ok(Outcome {
        code: EXIT_OK,
        lines: vec![format!(
            "{}: {} {} scenarios, pair coverage {:.3}, boundary coverage {:.3} -> {}",
            ls.scenario_id,
            suite.scenarios.len(),
            suite.method,
            suite.coverage.pair_coverage,
            suite.coverage.boundary_coverage,
            written.display()
        )],
        report,
    })
}

fn cmd_export(
    suite_path: &Path,
    logical_path: Option<&Path>,
    expected: &Path,
    trace: &TraceArgs,
    out: &Path,
) -> Result<Outcome, Failure> {
    let suite = Suite::from_json(&read(suite_path)?)
        .map_err(|e| Failure::new("concretize", format_code(&e), format!("{}: {e}", suite_path.display())))?;
    let logical_path = logical_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| suite_path.with_file_name("logical.json"));
    let ls = logical::deserialize_logical(&read(&logical_path)?)
        .map_err(|e| Failure::new("logical", format_code(&e), format!("{}: {e}", logical_path.display())))?;
    let spec = load_spec(expected)?;
    let manifest = export(out, &ls, &suite, &spec, trace)?;
    let dir = scenario_dir(out, &ls.scenario_id).join("testcases");
    Ok(Outcome {
        code: EXIT_OK,
        lines: vec![format!(
            "{}: {} test cases -> {}",
            ls.scenario_id,
            manifest.case_count,
            dir.display()
        )],
        report: json!({
            "status": EXIT_OK,
            "scenario_id": ls.scenario_id,
            "test_cases": manifest.case_count,
            "suite_hash": manifest.suite_hash,
            "output": dir.display().to_string(),
        }),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    paths: &[PathBuf],
    vocab: &Path,
    catalog: &Path,
    expected: &Path,
    method: &MethodArgs,
    trace: &TraceArgs,
    out: &Path,
) -> Result<Outcome, Failure> {
    let v = load_vocabulary(vocab)?;
    let cat = load_catalog(catalog, &v)?;
    let spec = load_spec(expected)?;
    let mut scenarios = Vec::new();
    let mut seen = BTreeSet::new();
    for path in paths {
        let fs = load_scenario(path, &v)?;
        check(path, &fs, &v)?;
        if !seen.insert(fs.scenario_id.clone()) {
            return Err(Failure::new(
                "functional",
                EXIT_FINDINGS,
                format!("{}: scenario id `{}` used by an earlier file", path.display(), fs.scenario_id),
            ));
        }
        scenarios.push((path, fs));
    }

    let mut lines = Vec::new();
    let mut reports = Vec::new();
    for (path, fs) in &scenarios {
        let ls = lowering::lower_to_logical(fs, &cat).map_err(|e| from_lowering(path, e))?;
        validate(&ls)?;
        write_logical(out, &ls)?;
        let suite = concretize::generate_suite(&ls, method.strategy()).map_err(from_concretize)?;
        write_suite(out, &ls, &suite)?;
        let manifest = export(out, &ls, &suite, &spec, trace)?;
        lines.push(format!(
            "{}: {} parameters, {} constraints, {} {} scenarios, pair coverage {:.3}, {} test cases -> {}",
            ls.scenario_id,
            ls.parameters.len(),
            ls.constraints.len(),
            suite.scenarios.len(),
            suite.method,
            suite.coverage.pair_coverage,
            manifest.case_count,
            scenario_dir(out, &ls.scenario_id).display()
        ));
        let mut report = suite_summary(&ls, &suite);
        report["parameters"] = ls.parameters.len().into();
        report["constraints"] = ls.constraints.len().into();
        report["test_cases"] = manifest.case_count.into();
        report["suite_hash"] = manifest.suite_hash.into();
        report["output"] = scenario_dir(out, &ls.scenario_id).display().to_string().into();
        reports.push(report);
    }
    Ok(Outcome {
        code: EXIT_OK,
        lines,
        report: json!({"status": EXIT_OK, "scenarios": reports}),
    })
}

/// Run a parsed command.
pub fn execute(cli: &Cli) -> Outcome {
    let result = match &cli.command {
        Command::Validate { paths, vocab } => Ok(cmd_validate(paths, vocab)),
        Command::Lower {
            path,
            vocab,
            catalog,
            out,
        } => cmd_lower(path, vocab, catalog, out.as_deref()),
        Command::Concretize { logical, method, out } => cmd_concretize(logical, method, out),
        Command::Export {
            suite,
            logical,
            expected,
            trace,
            out,
        } => cmd_export(suite, logical.as_deref(), expected, trace, out),
        Command::Pipeline {
            paths,
            vocab,
            catalog,
            expected,
            method,
            trace,
            out,
        } => cmd_pipeline(paths, vocab, catalog, expected, method, trace, out),
    };
    result.unwrap_or_else(Outcome::failed)
}

/// Parse `args`, run, print, and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_SYNTAX } else { EXIT_OK };
        }
    };
    let outcome = execute(&cli);
    let printed = if cli.json {
        writeln!(stdout, "{}", outcome.report)
    } else if outcome.code == EXIT_OK {
        outcome.lines.iter().try_for_each(|l| writeln!(stdout, "{l}"))
    } else {
        outcome.lines.iter().try_for_each(|l| writeln!(stderr, "{l}"))
    };
    match printed {
        Ok(()) => outcome.code,
        Err(_) => EXIT_IO,
    }
}
