//! Term inventory that grounds functional scenarios.
//!
//! A vocabulary is a flat set of kinded terms: entities (things that can be
//! instantiated in a scenario), relations between entities, and categorical
//! attributes of entities. It also carries the exclusion table used by the
//! consistency check: pairs of statement patterns that may not hold together.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;
use crate::error::FormatError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VocabularyError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid name `{name}`: {reason}")]
    InvalidName { name: String, reason: String },
    #[error("duplicate term `{name}`: declared as terms #{first} and #{second}")]
    DuplicateTerm {
        name: String,
        first: usize,
        second: usize,
    },
    #[error("term `{term}` applies to `{target}`, which is not an entity of this vocabulary")]
    DanglingReference { term: String, target: String },
    #[error("invalid term `{name}`: {reason}")]
    InvalidTerm { name: String, reason: String },
    #[error("invalid exclusion rule #{index}: {reason}")]
    InvalidExclusion { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Entity,
    Relation,
    Attribute,
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TermKind::Entity => "entity",
            TermKind::Relation => "relation",
            TermKind::Attribute => "attribute",
        })
    }
}

/// Kind-specific part of a term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermSpec {
    Entity,
    Relation {
        arity: usize,
        applies_to: Vec<String>,
    },
    Attribute {
        allowed_values: Vec<String>,
        applies_to: Vec<String>,
        /// Missing assignments of a required attribute are reported by the
        /// consistency check.
        required: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub name: String,
    pub spec: TermSpec,
    pub description: String,
}

impl Term {
    pub fn kind(&self) -> TermKind {
        match self.spec {
            TermSpec::Entity => TermKind::Entity,
            TermSpec::Relation { .. } => TermKind::Relation,
            TermSpec::Attribute { .. } => TermKind::Attribute,
        }
    }

    pub fn arity(&self) -> Option<usize> {
        match &self.spec {
            TermSpec::Relation { arity, .. } => Some(*arity),
            _ => None,
        }
    }

    /// Entity terms this relation or attribute may be applied to; empty for
    /// entities.
    pub fn applies_to(&self) -> &[String] {
        match &self.spec {
            TermSpec::Entity => &[],
            TermSpec::Relation { applies_to, .. } | TermSpec::Attribute { applies_to, .. } => {
                applies_to
            }
        }
    }

    pub fn allowed_values(&self) -> &[String] {
        match &self.spec {
            TermSpec::Attribute { allowed_values, .. } => allowed_values,
            _ => &[],
        }
    }

    pub fn is_required(&self) -> bool {
        matches!(self.spec, TermSpec::Attribute { required: true, .. })
    }
}

/// One side of an exclusion rule. Variables (`args`, `subject`) bind to
/// entity instances of a scenario; a variable shared by both sides must
/// bind to the same instance, and distinct variables to distinct instances.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pattern {
    Relation {
        relation: String,
        args: Vec<String>,
    },
    Attribute {
        attribute: String,
        subject: String,
        value: String,
    },
}

impl Pattern {
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Pattern::Relation { args, .. } => args.iter().map(String::as_str).collect(),
            Pattern::Attribute { subject, .. } => vec![subject.as_str()],
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Relation { relation, args } => match args.split_first() {
                Some((head, rest)) => {
                    write!(f, "{head} {relation}")?;
                    for arg in rest {
                        write!(f, " {arg}")?;
                    }
                    Ok(())
                }
                None => f.write_str(relation),
            },
            Pattern::Attribute {
                attribute,
                subject,
                value,
            } => write!(f, "{subject} {attribute} {value}"),
        }
    }
}

/// Two statement patterns that must not both match a scenario.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionRule {
    pub first: Pattern,
    pub second: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyRef {
    pub domain_name: String,
    pub version: String,
}

impl fmt::Display for VocabularyRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.domain_name, self.version)
    }
}

/// Immutable, validated term inventory. Terms are keyed by name, so the
/// order of declaration in the source document carries no meaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    domain_name: String,
    version: String,
    terms: BTreeMap<String, Term>,
    exclusions: Vec<ExclusionRule>,
}

/// Normalize a declared name: trimmed, lowercased, whitespace runs joined
/// with `-`. The result must match `[a-z][a-z0-9_-]*`.
pub fn normalize_name(raw: &str) -> Result<String, VocabularyError> {
    let joined = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("-")
        .to_lowercase();
    if is_identifier(&joined) {
        Ok(joined)
    } else {
        Err(VocabularyError::InvalidName {
            name: raw.to_string(),
            reason: "must match [a-z][a-z0-9_-]* after normalization".into(),
        })
    }
}

/// `[a-z][a-z0-9_-]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

impl Vocabulary {
    /// Build and validate a vocabulary. Names are normalized; `terms`
    /// positions are only used in diagnostics.
    pub fn new(
        domain_name: &str,
        version: &str,
        terms: Vec<Term>,
        exclusions: Vec<ExclusionRule>,
    ) -> Result<Self, VocabularyError> {
        let domain_name = normalize_name(domain_name)?;
        if version.trim().is_empty() {
            return Err(VocabularyError::InvalidName {
                name: version.to_string(),
                reason: "version must not be empty".into(),
            });
        }

        let mut by_name: BTreeMap<String, (usize, Term)> = BTreeMap::new();
        for (index, term) in terms.into_iter().enumerate() {
            let term = normalize_term(term)?;
            if let Some((first, _)) = by_name.get(&term.name) {
                return Err(VocabularyError::DuplicateTerm {
                    name: term.name,
                    first: *first,
                    second: index,
                });
            }
            by_name.insert(term.name.clone(), (index, term));
        }
        let terms: BTreeMap<String, Term> =
            by_name.into_iter().map(|(k, (_, t))| (k, t)).collect();

        for term in terms.values() {
            check_term_shape(term)?;
            for target in term.applies_to() {
                match terms.get(target) {
                    Some(t) if t.kind() == TermKind::Entity => {}
                    _ => {
                        return Err(VocabularyError::DanglingReference {
                            term: term.name.clone(),
                            target: target.clone(),
                        })
                    }
                }
            }
        }

        let mut vocabulary = Vocabulary {
            domain_name,
            version: version.trim().to_string(),
            terms,
            exclusions: Vec::new(),
        };
        let mut normalized = Vec::with_capacity(exclusions.len());
        for (index, rule) in exclusions.into_iter().enumerate() {
            normalized.push(vocabulary.check_exclusion(index, rule)?);
        }
        normalized.sort();
        normalized.dedup();
        vocabulary.exclusions = normalized;
        Ok(vocabulary)
    }

    pub fn domain_name(&self) -> &str {
        &self.domain_name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn reference(&self) -> VocabularyRef {
        VocabularyRef {
            domain_name: self.domain_name.clone(),
            version: self.version.clone(),
        }
    }

    /// Exact, case-sensitive lookup.
    pub fn lookup_term(&self, name: &str) -> Option<&Term> {
        self.terms.get(name)
    }

    pub fn lookup_kind(&self, name: &str, kind: TermKind) -> Option<&Term> {
        self.lookup_term(name).filter(|t| t.kind() == kind)
    }

    /// Terms in name order.
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.values()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn exclusions(&self) -> &[ExclusionRule] {
        &self.exclusions
    }

    /// The closest term name within edit distance 2, for "did you mean"
    /// hints. Ties go to the alphabetically first name.
    pub fn nearest_term(&self, word: &str) -> Option<&str> {
        let mut best: Option<(usize, &str)> = None;
        for name in self.terms.keys() {
            let d = edit_distance(word, name);
            if d <= 2 && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, name));
            }
        }
        best.map(|(_, n)| n)
    }

    /// Canonical JSON encoding.
    pub fn to_canonical_json(&self) -> Result<String, FormatError> {
        canon::to_canonical_string(&self.to_document())
    }

    fn to_document(&self) -> VocabularyDocument {
        VocabularyDocument {
            domain_name: self.domain_name.clone(),
            version: self.version.clone(),
            terms: self.terms.values().map(TermRecord::from).collect(),
            exclusions: self.exclusions.clone(),
        }
    }

    fn check_exclusion(
        &self,
        index: usize,
        rule: ExclusionRule,
    ) -> Result<ExclusionRule, VocabularyError> {
        let invalid = |reason: String| VocabularyError::InvalidExclusion { index, reason };
        let mut sides = Vec::with_capacity(2);
        for pattern in [rule.first, rule.second] {
            let pattern = match pattern {
                Pattern::Relation { relation, args } => {
                    let relation = normalize_name(&relation)?;
                    let term = self
                        .lookup_kind(&relation, TermKind::Relation)
                        .ok_or_else(|| invalid(format!("`{relation}` is not a relation")))?;
                    if term.arity() != Some(args.len()) {
                        return Err(invalid(format!(
                            "`{relation}` takes {} arguments, pattern has {}",
                            term.arity().unwrap_or(0),
                            args.len()
                        )));
                    }
                    let mut seen = BTreeSet::new();
                    for arg in &args {
                        if !is_identifier(arg) {
                            return Err(invalid(format!("bad variable `{arg}`")));
                        }
                        if !seen.insert(arg) {
                            return Err(invalid(format!("variable `{arg}` repeated in one pattern")));
                        }
                    }
                    Pattern::Relation { relation, args }
                }
                Pattern::Attribute {
                    attribute,
                    subject,
                    value,
                } => {
                    let attribute = normalize_name(&attribute)?;
                    let value = normalize_name(&value)?;
                    let term = self
                        .lookup_kind(&attribute, TermKind::Attribute)
                        .ok_or_else(|| invalid(format!("`{attribute}` is not an attribute")))?;
                    if !term.allowed_values().contains(&value) {
                        return Err(invalid(format!(
                            "`{value}` is not an allowed value of `{attribute}`"
                        )));
                    }
                    if !is_identifier(&subject) {
                        return Err(invalid(format!("bad variable `{subject}`")));
                    }
                    Pattern::Attribute {
                        attribute,
                        subject,
                        value,
                    }
                }
            };
            sides.push(pattern);
        }
        let second = sides.pop().expect("two sides");
        let first = sides.pop().expect("two sides");
        Ok(ExclusionRule { first, second })
    }
}

fn normalize_term(term: Term) -> Result<Term, VocabularyError> {
    let name = normalize_name(&term.name)?;
    let normalize_all = |names: Vec<String>| -> Result<Vec<String>, VocabularyError> {
        names.iter().map(|n| normalize_name(n)).collect()
    };
    let spec = match term.spec {
        TermSpec::Entity => TermSpec::Entity,
        TermSpec::Relation { arity, applies_to } => TermSpec::Relation {
            arity,
            applies_to: normalize_all(applies_to)?,
        },
        TermSpec::Attribute {
            allowed_values,
            applies_to,
            required,
        } => TermSpec::Attribute {
            allowed_values: normalize_all(allowed_values)?,
            applies_to: normalize_all(applies_to)?,
            required,
        },
    };
    Ok(Term {
        name,
        spec,
        description: term.description,
    })
}

fn check_term_shape(term: &Term) -> Result<(), VocabularyError> {
    let invalid = |reason: &str| VocabularyError::InvalidTerm {
        name: term.name.clone(),
        reason: reason.to_string(),
    };
    if ["is", "scenario"].contains(&term.name.as_str()) {
        return Err(invalid("`is` and `scenario` are reserved words"));
    }
    match &term.spec {
        TermSpec::Entity => {}
        TermSpec::Relation { arity, applies_to } => {
            if *arity < 1 {
                return Err(invalid("relations need arity >= 1"));
            }
            if applies_to.is_empty() {
                return Err(invalid("relations must apply to at least one entity"));
            }
        }
        TermSpec::Attribute {
            allowed_values,
            applies_to,
            ..
        } => {
            if allowed_values.is_empty() {
                return Err(invalid("attributes need at least one allowed value"));
            }
            let distinct: BTreeSet<_> = allowed_values.iter().collect();
            if distinct.len() != allowed_values.len() {
                return Err(invalid("allowed values must be distinct"));
            }
            if applies_to.is_empty() {
                return Err(invalid("attributes must apply to at least one entity"));
            }
        }
    }
    Ok(())
}

/// Levenshtein distance over chars.
fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = Vec::with_capacity(b.len() + 1);
        cur.push(i + 1);
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != *cb);
            cur.push(substitute.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyDocument {
    domain_name: String,
    version: String,
    terms: Vec<TermRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    exclusions: Vec<ExclusionRule>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRecord {
    name: String,
    kind: TermKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allowed_values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    applies_to: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    required: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
}

impl From<&Term> for TermRecord {
    fn from(term: &Term) -> Self {
        let mut record = TermRecord {
            name: term.name.clone(),
            kind: term.kind(),
            arity: None,
            allowed_values: None,
            applies_to: None,
            required: false,
            description: term.description.clone(),
        };
        match &term.spec {
            TermSpec::Entity => {}
            TermSpec::Relation { arity, applies_to } => {
                record.arity = Some(*arity);
                record.applies_to = Some(applies_to.clone());
            }
            TermSpec::Attribute {
                allowed_values,
                applies_to,
                required,
            } => {
                record.allowed_values = Some(allowed_values.clone());
                record.applies_to = Some(applies_to.clone());
                record.required = *required;
            }
        }
        record
    }
}

impl TermRecord {
    fn into_term(self) -> Result<Term, VocabularyError> {
        let invalid = |reason: &str| VocabularyError::InvalidTerm {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        let spec = match self.kind {
            TermKind::Entity => {
                if self.arity.is_some()
                    || self.allowed_values.is_some()
                    || self.applies_to.is_some()
                    || self.required
                {
                    return Err(invalid("entities take no arity, values, applies_to or required"));
                }
                TermSpec::Entity
            }
            TermKind::Relation => {
                if self.allowed_values.is_some() || self.required {
                    return Err(invalid("relations take no allowed_values or required"));
                }
                TermSpec::Relation {
                    arity: self.arity.ok_or_else(|| invalid("relations need an arity"))?,
                    applies_to: self.applies_to.clone().unwrap_or_default(),
                }
            }
            TermKind::Attribute => {
                if self.arity.is_some() {
                    return Err(invalid("attributes take no arity"));
                }
                TermSpec::Attribute {
                    allowed_values: self.allowed_values.clone().unwrap_or_default(),
                    applies_to: self.applies_to.clone().unwrap_or_default(),
                    required: self.required,
                }
            }
        };
        Ok(Term {
            name: self.name,
            spec,
            description: self.description,
        })
    }
}

/// Parse and validate a vocabulary document.
pub fn load_vocabulary(source: &str) -> Result<Vocabulary, VocabularyError> {
    let tree = canon::parse_json(source)?;
    let doc: VocabularyDocument = canon::from_tree(tree)?;
    let terms = doc
        .terms
        .into_iter()
        .map(TermRecord::into_term)
        .collect::<Result<Vec<_>, _>>()?;
    Vocabulary::new(&doc.domain_name, &doc.version, terms, doc.exclusions)
}

/// Canonical JSON text of a vocabulary; `load_vocabulary` inverts it.
pub fn serialize_vocabulary(vocabulary: &Vocabulary) -> Result<String, FormatError> {
    vocabulary.to_canonical_json()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HIGHWAY: &str = r#"{
        "domain_name": "highway",
        "version": "1",
        "terms": [
            {"name": "car", "kind": "entity"},
            {"name": "truck", "kind": "entity"},
            {"name": "two-lane motorway", "kind": "entity"},
            {"name": "follows", "kind": "relation", "arity": 2, "applies_to": ["car", "truck"]},
            {"name": "geometry", "kind": "attribute", "allowed_values": ["straight", "curve"],
             "applies_to": ["two-lane motorway"]}
        ]
    }"#;

    #[test]
    fn loads_worked_example_vocabulary() {
        let v = load_vocabulary(HIGHWAY).unwrap();
        assert_eq!(v.len(), 5);
        let road = v.lookup_term("two-lane-motorway").unwrap();
        assert_eq!(road.kind(), TermKind::Entity);
        let geometry = v.lookup_term("geometry").unwrap();
        assert_eq!(geometry.applies_to(), ["two-lane-motorway"]);
        assert_eq!(geometry.allowed_values(), ["straight", "curve"]);
    }

    #[test]
    fn lookup_is_exact_and_case_sensitive() {
        let v = load_vocabulary(HIGHWAY).unwrap();
        assert_eq!(v.lookup_term("truck").map(Term::kind), Some(TermKind::Entity));
        assert!(v.lookup_term("bus").is_none());
        assert!(v.lookup_term("Truck").is_none());
    }

    #[test]
    fn empty_vocabulary_is_valid() {
        let v = load_vocabulary(r#"{"domain_name": "d", "version": "0", "terms": []}"#).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let src = r#"{"domain_name": "d", "version": "0", "terms": [
            {"name": "car", "kind": "entity"}, {"name": "Car", "kind": "entity"}]}"#;
        assert_eq!(
            load_vocabulary(src),
            Err(VocabularyError::DuplicateTerm {
                name: "car".into(),
                first: 0,
                second: 1
            })
        );
    }

    #[test]
    fn dangling_applies_to_is_rejected() {
        let src = r#"{"domain_name": "d", "version": "0", "terms": [
            {"name": "car", "kind": "entity"},
            {"name": "follows", "kind": "relation", "arity": 2, "applies_to": ["car", "bus"]}]}"#;
        assert!(matches!(
            load_vocabulary(src),
            Err(VocabularyError::DanglingReference { target, .. }) if target == "bus"
        ));
        // applies_to must name an entity, not any term
        let src = r#"{"domain_name": "d", "version": "0", "terms": [
            {"name": "car", "kind": "entity"},
            {"name": "colour", "kind": "attribute", "allowed_values": ["red"], "applies_to": ["car"]},
            {"name": "paints", "kind": "relation", "arity": 1, "applies_to": ["colour"]}]}"#;
        assert!(matches!(
            load_vocabulary(src),
            Err(VocabularyError::DanglingReference { .. })
        ));
    }

    #[test]
    fn malformed_documents_report_position() {
        let err = load_vocabulary("{\"domain_name\": \"d\",\n \"terms\": [}").unwrap_err();
        assert!(matches!(
            err,
            VocabularyError::Format(FormatError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn kind_specific_invariants() {
        let bad = [
            r#"{"name": "r", "kind": "relation", "arity": 0, "applies_to": ["car"]}"#,
            r#"{"name": "r", "kind": "relation", "applies_to": ["car"]}"#,
            r#"{"name": "e", "kind": "entity", "arity": 1}"#,
            r#"{"name": "a", "kind": "attribute", "allowed_values": [], "applies_to": ["car"]}"#,
            r#"{"name": "a", "kind": "attribute", "allowed_values": ["x", "x"], "applies_to": ["car"]}"#,
            r#"{"name": "is", "kind": "entity"}"#,
        ];
        for term in bad {
            let src = format!(
                r#"{{"domain_name": "d", "version": "0", "terms": [{{"name": "car", "kind": "entity"}}, {term}]}}"#
            );
            assert!(
                matches!(load_vocabulary(&src), Err(VocabularyError::InvalidTerm { .. })),
                "{term}"
            );
        }
    }

    #[test]
    fn names_are_normalized() {
        assert_eq!(normalize_name(" Two-Lane  Motorway ").unwrap(), "two-lane-motorway");
        assert!(normalize_name("9lives").is_err());
        assert!(normalize_name("").is_err());
        assert!(normalize_name("a.b").is_err());
    }

    #[test]
    fn exclusions_are_validated() {
        let src = r#"{"domain_name": "d", "version": "0", "terms": [
            {"name": "car", "kind": "entity"},
            {"name": "follows", "kind": "relation", "arity": 2, "applies_to": ["car"]}],
            "exclusions": [{"first": {"relation": "follows", "args": ["a"]},
                            "second": {"relation": "follows", "args": ["b", "a"]}}]}"#;
        assert!(matches!(
            load_vocabulary(src),
            Err(VocabularyError::InvalidExclusion { index: 0, .. })
        ));
    }

    #[test]
    fn nearest_term_hint() {
        let v = load_vocabulary(HIGHWAY).unwrap();
        assert_eq!(v.nearest_term("folows"), Some("follows"));
        assert_eq!(v.nearest_term("overtakes"), None);
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let v = load_vocabulary(HIGHWAY).unwrap();
        let text = serialize_vocabulary(&v).unwrap();
        let again = load_vocabulary(&text).unwrap();
        assert_eq!(again, v);
        assert_eq!(serialize_vocabulary(&again).unwrap(), text);
    }
}
