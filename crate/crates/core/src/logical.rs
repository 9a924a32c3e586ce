//! Logical scenarios: named parameters with ranges and optional
//! distributions, plus constraints between them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canon;
use crate::error::FormatError;
use crate::expr::{Inequality, Interval};

pub const FORMAT: &str = "logical/1";

/// Closed interval `[lo, hi]`, encoded as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_range(&self, other: &Range) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.lo, self.hi)
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Serialize for Range {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lo, self.hi].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Range {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [lo, hi] = <[f64; 2]>::deserialize(d)?;
        Ok(Range { lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Distribution {
    Uniform,
    TruncatedGaussian { mean: f64, stddev: f64 },
}

impl Distribution {
    /// Problem with this distribution over `range`, if any.
    pub fn check(&self, range: &Range) -> Result<(), String> {
        match *self {
            Distribution::Uniform => Ok(()),
            Distribution::TruncatedGaussian { mean, stddev } => {
                if !(stddev.is_finite() && stddev > 0.0) {
                    Err(format!("stddev must be > 0, got {stddev}"))
                } else if !(mean.is_finite() && range.contains(mean)) {
                    Err(format!("mean {mean} lies outside {range}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::TruncatedGaussian { .. } => "truncated-gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParameterKind {
    /// Fixed for the whole scenario (scenery: lane widths, radii).
    ScalarStatic,
    /// Initial value of a time-varying signal (positions, speeds).
    ScalarInitial,
}

/// Where a parameter or constraint came from in the functional scenario.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Provenance {
    Instance {
        instance: String,
        term: String,
    },
    Attribute {
        instance: String,
        attribute: String,
        value: String,
    },
    Relation {
        relation: String,
        arguments: Vec<String>,
    },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Instance { instance, term } => write!(f, "{term} {instance}"),
            Provenance::Attribute {
                instance,
                attribute,
                value,
            } => write!(f, "{instance} {attribute} {value}"),
            Provenance::Relation {
                relation,
                arguments,
            } => {
                let mut args = arguments.iter();
                if let Some(first) = args.next() {
                    write!(f, "{first} ")?;
                }
                f.write_str(relation)?;
                for arg in args {
                    write!(f, " {arg}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameter {
    pub name: String,
    pub unit: String,
    pub range: Range,
    /// `None` means unspecified; samplers treat it as uniform. Serialized
    /// explicitly as `null`.
    #[serde(default)]
    pub distribution: Option<Distribution>,
    pub kind: ParameterKind,
    pub provenance: Provenance,
}

impl Parameter {
    pub fn effective_distribution(&self) -> Distribution {
        self.distribution.unwrap_or(Distribution::Uniform)
    }

    /// `(instance, local)` split of a qualified `<instance>.<local>` name.
    pub fn split_name(&self) -> Option<(&str, &str)> {
        self.name.split_once('.')
    }
}

/// `target ∈ [slope·source + offset − tolerance, slope·source + offset + tolerance]`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correlation {
    pub target: String,
    pub source: String,
    pub slope: f64,
    pub offset: f64,
    pub tolerance: f64,
}

impl Correlation {
    pub fn is_well_formed(&self) -> bool {
        self.slope.is_finite()
            && self.offset.is_finite()
            && self.tolerance.is_finite()
            && self.tolerance >= 0.0
    }

    /// Band bounds for a given source value, computed the same way
    /// everywhere so that checks and interval reasoning agree.
    fn band(&self, source: f64) -> (f64, f64) {
        let center = self.slope * source + self.offset;
        (center - self.tolerance, center + self.tolerance)
    }

    pub fn holds(&self, lookup: &impl Fn(&str) -> Option<f64>) -> Option<bool> {
        let (lo, hi) = self.band(lookup(&self.source)?);
        let target = lookup(&self.target)?;
        Some(lo <= target && target <= hi)
    }

    fn interval_infeasible(&self, lookup: &impl Fn(&str) -> Option<Interval>) -> bool {
        let (Some(source), Some(target)) = (lookup(&self.source), lookup(&self.target)) else {
            return false;
        };
        let a = self.band(source.lo);
        let b = self.band(source.hi);
        // band edges are monotone in the source value
        let lowest = a.0.min(b.0);
        let highest = a.1.max(b.1);
        if lowest.is_nan() || highest.is_nan() {
            return false;
        }
        target.hi < lowest || target.lo > highest
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {:?} * {} + {:?} ± {:?}",
            self.target, self.slope, self.source, self.offset, self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintForm {
    Inequality(Inequality),
    Correlation(Correlation),
}

impl ConstraintForm {
    pub fn variables(&self) -> BTreeSet<&str> {
        match self {
            ConstraintForm::Inequality(i) => i.variables(),
            ConstraintForm::Correlation(c) => {
                BTreeSet::from([c.target.as_str(), c.source.as_str()])
            }
        }
    }

    /// Exact check by substitution; `None` if a variable is unbound.
    pub fn holds(&self, lookup: &impl Fn(&str) -> Option<f64>) -> Option<bool> {
        match self {
            ConstraintForm::Inequality(i) => i.holds(lookup),
            ConstraintForm::Correlation(c) => c.holds(lookup),
        }
    }

    pub fn interval_infeasible(&self, lookup: &impl Fn(&str) -> Option<Interval>) -> bool {
        match self {
            ConstraintForm::Inequality(i) => i.interval_infeasible(lookup),
            ConstraintForm::Correlation(c) => c.interval_infeasible(lookup),
        }
    }

    pub fn rename(&self, f: &mut impl FnMut(&str) -> String) -> ConstraintForm {
        match self {
            ConstraintForm::Inequality(i) => ConstraintForm::Inequality(i.rename(f)),
            ConstraintForm::Correlation(c) => ConstraintForm::Correlation(Correlation {
                target: f(&c.target),
                source: f(&c.source),
                ..c.clone()
            }),
        }
    }
}

impl fmt::Display for ConstraintForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintForm::Inequality(i) => i.fmt(f),
            ConstraintForm::Correlation(c) => c.fmt(f),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum FormRecord {
    Inequality {
        expression: Inequality,
    },
    Correlation {
        target: String,
        source: String,
        slope: f64,
        offset: f64,
        tolerance: f64,
    },
}

impl Serialize for ConstraintForm {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ConstraintForm::Inequality(i) => FormRecord::Inequality {
                expression: i.clone(),
            },
            ConstraintForm::Correlation(c) => FormRecord::Correlation {
                target: c.target.clone(),
                source: c.source.clone(),
                slope: c.slope,
                offset: c.offset,
                tolerance: c.tolerance,
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConstraintForm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match FormRecord::deserialize(d)? {
            FormRecord::Inequality { expression } => ConstraintForm::Inequality(expression),
            FormRecord::Correlation {
                target,
                source,
                slope,
                offset,
                tolerance,
            } => ConstraintForm::Correlation(Correlation {
                target,
                source,
                slope,
                offset,
                tolerance,
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraint {
    pub id: String,
    pub form: ConstraintForm,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRef {
    pub id: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalScenario {
    pub scenario_id: String,
    pub source_ref: SourceRef,
    pub parameters: Vec<Parameter>,
    pub constraints: Vec<Constraint>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogicalDocument {
    format: String,
    scenario_id: String,
    source_ref: SourceRef,
    parameters: Vec<Parameter>,
    constraints: Vec<Constraint>,
}

impl LogicalScenario {
    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn ranges(&self) -> BTreeMap<&str, Range> {
        self.parameters
            .iter()
            .map(|p| (p.name.as_str(), p.range))
            .collect()
    }

    /// Ids of constraints that fail (or cannot be evaluated) under the
    /// given assignment.
    pub fn violated_constraints<'a>(&'a self, values: &BTreeMap<String, f64>) -> Vec<&'a Constraint> {
        let lookup = |name: &str| values.get(name).copied();
        self.constraints
            .iter()
            .filter(|c| c.form.holds(&lookup) != Some(true))
            .collect()
    }

    pub fn to_canonical_json(&self) -> Result<String, FormatError> {
        serialize_logical(self)
    }

    pub fn content_hash(&self) -> Result<String, FormatError> {
        Ok(canon::sha256_hex(serialize_logical(self)?.as_bytes()))
    }

    pub fn source(&self) -> Result<SourceRef, FormatError> {
        Ok(SourceRef {
            id: self.scenario_id.clone(),
            hash: self.content_hash()?,
        })
    }
}

/// Canonical `logical/1` document.
pub fn serialize_logical(ls: &LogicalScenario) -> Result<String, FormatError> {
    canon::to_canonical_string(&LogicalDocument {
        format: FORMAT.into(),
        scenario_id: ls.scenario_id.clone(),
        source_ref: ls.source_ref.clone(),
        parameters: ls.parameters.clone(),
        constraints: ls.constraints.clone(),
    })
}

pub fn deserialize_logical(text: &str) -> Result<LogicalScenario, FormatError> {
    let tree = canon::parse_json(text)?;
    canon::expect_format(&tree, FORMAT)?;
    let doc: LogicalDocument = canon::from_tree(tree)?;
    Ok(LogicalScenario {
        scenario_id: doc.scenario_id,
        source_ref: doc.source_ref,
        parameters: doc.parameters,
        constraints: doc.constraints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidationCode {
    DuplicateParameter,
    DuplicateConstraint,
    EmptyRange,
    BadDistribution,
    UndeclaredParameter,
    MalformedConstraint,
    IntervalInfeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFinding {
    pub code: ValidationCode,
    pub elements: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenario_id: String,
    pub findings: Vec<ValidationFinding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has(&self, code: ValidationCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }
}

/// Structural invariants plus a per-constraint interval pre-check. An
/// `INTERVAL_INFEASIBLE` finding is a proof that no assignment within the
/// ranges satisfies that constraint; the absence of findings proves
/// nothing about joint feasibility.
pub fn validate_logical(ls: &LogicalScenario) -> ValidationReport {
    let mut findings = Vec::new();
    let mut push = |code, elements: Vec<String>, message: String| {
        findings.push(ValidationFinding {
            code,
            elements,
            message,
        })
    };

    let mut names = BTreeSet::new();
    let mut usable_ranges: BTreeMap<&str, Interval> = BTreeMap::new();
    for p in &ls.parameters {
        if !names.insert(p.name.as_str()) {
            push(
                ValidationCode::DuplicateParameter,
                vec![p.name.clone()],
                format!("parameter `{}` declared more than once", p.name),
            );
            continue;
        }
        if !p.range.is_valid() {
            push(
                ValidationCode::EmptyRange,
                vec![p.name.clone()],
                format!("range {} of `{}` is empty or not finite", p.range, p.name),
            );
            continue;
        }
        if let Some(dist) = &p.distribution {
            if let Err(reason) = dist.check(&p.range) {
                push(
                    ValidationCode::BadDistribution,
                    vec![p.name.clone()],
                    format!("`{}`: {reason}", p.name),
                );
            }
        }
        usable_ranges.insert(&p.name, p.range.interval());
    }

    let mut ids = BTreeSet::new();
    for c in &ls.constraints {
        if !ids.insert(c.id.as_str()) {
            push(
                ValidationCode::DuplicateConstraint,
                vec![c.id.clone()],
                format!("constraint id `{}` used more than once", c.id),
            );
        }
        let undeclared: Vec<&str> = c
            .form
            .variables()
            .into_iter()
            .filter(|v| !names.contains(v))
            .collect();
        if !undeclared.is_empty() {
            push(
                ValidationCode::UndeclaredParameter,
                std::iter::once(c.id.clone())
                    .chain(undeclared.iter().map(|s| s.to_string()))
                    .collect(),
                format!(
                    "constraint `{}` references undeclared {}",
                    c.id,
                    undeclared.join(", ")
                ),
            );
            continue;
        }
        if let ConstraintForm::Correlation(corr) = &c.form {
            if !corr.is_well_formed() {
                push(
                    ValidationCode::MalformedConstraint,
                    vec![c.id.clone()],
                    format!("correlation `{}` needs finite coefficients and tolerance >= 0", c.id),
                );
                continue;
            }
        }
        let lookup = |name: &str| usable_ranges.get(name).copied();
        if c.form.variables().iter().all(|v| usable_ranges.contains_key(v))
            && c.form.interval_infeasible(&lookup)
        {
            push(
                ValidationCode::IntervalInfeasible,
                vec![c.id.clone()],
                format!(
                    "constraint `{}` ({}) cannot hold anywhere in the parameter ranges",
                    c.id, c.form
                ),
            );
        }
    }

    ValidationReport {
        scenario_id: ls.scenario_id.clone(),
        findings,
    }
}
