//! Functional scenarios: the controlled-language level.
//!
//! The DSL has one statement per line, or several separated by `/`. `#`
//! starts a comment. Statement forms:
//!
//! ```text
//! scenario <id>
//! <entity-term> <id>
//! [<label>] <id> is <entity-term>
//! <id> <relation-term> <id>...
//! <id> <attribute-term> <value>
//! ```
//!
//! Instances must be declared before they are referenced.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;
use crate::error::FormatError;
use crate::vocabulary::{is_identifier, Pattern, TermKind, Vocabulary, VocabularyRef};

pub const FORMAT: &str = "functional/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityInstance {
    pub instance_id: String,
    pub term: String,
    /// Free descriptive noun from the `<label> <id> is <term>` form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationPhrase {
    pub relation: String,
    pub arguments: Vec<String>,
}

impl RelationPhrase {
    /// The phrase as it reads in the DSL, e.g. `c1 follows t1`.
    pub fn text(&self) -> String {
        Pattern::Relation {
            relation: self.relation.clone(),
            args: self.arguments.clone(),
        }
        .to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeAssignment {
    pub instance_id: String,
    pub attribute: String,
    pub value: String,
}

impl AttributeAssignment {
    pub fn text(&self) -> String {
        format!("{} {} {}", self.instance_id, self.attribute, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalScenario {
    pub scenario_id: String,
    pub vocabulary_ref: VocabularyRef,
    pub instances: Vec<EntityInstance>,
    pub relations: Vec<RelationPhrase>,
    pub attributes: Vec<AttributeAssignment>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown {expected} `{word}`{}", hint_suffix(.hint))]
    UnknownTerm {
        line: usize,
        word: String,
        expected: String,
        hint: Option<String>,
    },
    #[error("line {line}: `{id}` is not a declared instance")]
    UnknownInstance { line: usize, id: String },
    #[error("line {line}: relation `{relation}` takes {expected} arguments, got {found}")]
    ArityMismatch {
        line: usize,
        relation: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: `{value}` is not an allowed value of `{attribute}` (allowed: {})", .allowed.join(", "))]
    IllegalAttributeValue {
        line: usize,
        attribute: String,
        value: String,
        allowed: Vec<String>,
    },
    #[error("line {line}: `{term}` cannot be applied to `{instance}`, a `{entity}`")]
    IllegalApplication {
        line: usize,
        term: String,
        instance: String,
        entity: String,
    },
    #[error("line {line}: instance `{id}` already declared on line {first_line}")]
    DuplicateInstance {
        line: usize,
        id: String,
        first_line: usize,
    },
    #[error("line {line}: `{attribute}` of `{instance}` already assigned")]
    DuplicateAttribute {
        line: usize,
        instance: String,
        attribute: String,
    },
    #[error("cannot vary `{instance} {attribute}`: {reason}")]
    UnknownVariationTarget {
        instance: String,
        attribute: String,
        reason: String,
    },
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl FunctionalError {
    /// Source line of a parse error, if it has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            FunctionalError::Syntax { line, .. }
            | FunctionalError::UnknownTerm { line, .. }
            | FunctionalError::UnknownInstance { line, .. }
            | FunctionalError::ArityMismatch { line, .. }
            | FunctionalError::IllegalAttributeValue { line, .. }
            | FunctionalError::IllegalApplication { line, .. }
            | FunctionalError::DuplicateInstance { line, .. }
            | FunctionalError::DuplicateAttribute { line, .. } => Some(*line),
            _ => None,
        }
    }
}

fn hint_suffix(hint: &Option<String>) -> String {
    match hint {
        Some(h) => format!(" (did you mean `{h}`?)"),
        None => String::new(),
    }
}

/// Split DSL text into `(line, tokens)` statements.
fn statements(dsl: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    dsl.lines().enumerate().flat_map(|(index, line)| {
        let code = line.split('#').next().unwrap_or("");
        code.split('/')
            .map(|stmt| stmt.split_whitespace().collect::<Vec<_>>())
            .filter(|tokens| !tokens.is_empty())
            .map(move |tokens| (index + 1, tokens))
            .collect::<Vec<_>>()
    })
}

struct Parser<'v> {
    vocabulary: &'v Vocabulary,
    scenario_id: Option<String>,
    instances: Vec<EntityInstance>,
    declared: BTreeMap<String, (usize, String)>,
    relations: Vec<RelationPhrase>,
    attributes: Vec<AttributeAssignment>,
    assigned: BTreeSet<(String, String)>,
}

impl<'v> Parser<'v> {
    fn unknown(&self, line: usize, word: &str, expected: &str) -> FunctionalError {
        FunctionalError::UnknownTerm {
            line,
            word: word.to_string(),
            expected: expected.to_string(),
            hint: self
                .vocabulary
                .nearest_term(word)
                .filter(|h| *h != word)
                .map(str::to_string),
        }
    }

    fn statement(&mut self, line: usize, tokens: &[&str]) -> Result<(), FunctionalError> {
        let syntax = |message: String| FunctionalError::Syntax { line, message };
        for token in tokens {
            if !is_identifier(token) {
                return Err(syntax(format!(
                    "`{token}` is not a word (expected [a-z][a-z0-9_-]*)"
                )));
            }
        }

        if tokens[0] == "scenario" {
            if tokens.len() != 2 {
                return Err(syntax("expected `scenario <id>`".into()));
            }
            if self.scenario_id.is_some() {
                return Err(syntax("only one `scenario` header is allowed".into()));
            }
            self.scenario_id = Some(tokens[1].to_string());
            return Ok(());
        }
        if self.scenario_id.is_none() {
            return Err(syntax("the first statement must be `scenario <id>`".into()));
        }

        // [<label>] <id> is <entity-term>
        if tokens.len() >= 3 && tokens[tokens.len() - 2] == "is" {
            let (label, id) = match tokens.len() {
                3 => (None, tokens[0]),
                4 => (Some(tokens[0].to_string()), tokens[1]),
                _ => return Err(syntax("expected `[<label>] <id> is <entity>`".into())),
            };
            let term = tokens[tokens.len() - 1];
            if self.vocabulary.lookup_kind(term, TermKind::Entity).is_none() {
                return Err(self.unknown(line, term, "entity"));
            }
            return self.declare(line, id, term, label);
        }

        // <entity-term> <id>
        if self
            .vocabulary
            .lookup_kind(tokens[0], TermKind::Entity)
            .is_some()
        {
            if tokens.len() != 2 {
                return Err(syntax(format!("expected `{} <id>`", tokens[0])));
            }
            return self.declare(line, tokens[1], tokens[0], None);
        }

        if tokens.len() < 2 {
            return Err(match self.vocabulary.lookup_term(tokens[0]) {
                Some(_) => syntax(format!("`{}` cannot start a statement", tokens[0])),
                None if self.declared.contains_key(tokens[0]) => {
                    syntax("incomplete statement".into())
                }
                None => self.unknown(line, tokens[0], "entity"),
            });
        }

        let subject = tokens[0];
        let predicate = self.vocabulary.lookup_term(tokens[1]);
        if !self.declared.contains_key(subject) {
            return Err(match (self.vocabulary.lookup_term(subject), predicate) {
                (Some(_), _) => syntax(format!("`{subject}` cannot start a statement")),
                (None, Some(p)) if p.kind() != TermKind::Entity => {
                    FunctionalError::UnknownInstance {
                        line,
                        id: subject.to_string(),
                    }
                }
                (None, _) => self.unknown(line, subject, "entity"),
            });
        }

        match predicate.map(|t| t.kind()) {
            Some(TermKind::Relation) => self.relation(line, tokens),
            Some(TermKind::Attribute) => self.attribute(line, tokens),
            _ => Err(self.unknown(line, tokens[1], "relation or attribute")),
        }
    }

    fn declare(
        &mut self,
        line: usize,
        id: &str,
        term: &str,
        label: Option<String>,
    ) -> Result<(), FunctionalError> {
        if self.vocabulary.lookup_term(id).is_some() || id == "is" || id == "scenario" {
            return Err(FunctionalError::Syntax {
                line,
                message: format!("`{id}` is a vocabulary term or keyword, not an instance id"),
            });
        }
        if let Some((first_line, _)) = self.declared.get(id) {
            return Err(FunctionalError::DuplicateInstance {
                line,
                id: id.to_string(),
                first_line: *first_line,
            });
        }
        self.declared
            .insert(id.to_string(), (line, term.to_string()));
        self.instances.push(EntityInstance {
            instance_id: id.to_string(),
            term: term.to_string(),
            label,
        });
        Ok(())
    }

    fn entity_of(&self, line: usize, id: &str) -> Result<&str, FunctionalError> {
        self.declared
            .get(id)
            .map(|(_, term)| term.as_str())
            .ok_or_else(|| FunctionalError::UnknownInstance {
                line,
                id: id.to_string(),
            })
    }

    fn relation(&mut self, line: usize, tokens: &[&str]) -> Result<(), FunctionalError> {
        let term = self
            .vocabulary
            .lookup_term(tokens[1])
            .expect("dispatched on a known relation");
        let arguments: Vec<&str> = std::iter::once(tokens[0])
            .chain(tokens[2..].iter().copied())
            .collect();
        let arity = term.arity().unwrap_or(0);
        if arguments.len() != arity {
            return Err(FunctionalError::ArityMismatch {
                line,
                relation: term.name.clone(),
                expected: arity,
                found: arguments.len(),
            });
        }
        for arg in &arguments {
            let entity = self.entity_of(line, arg)?;
            if !term.applies_to().iter().any(|t| t == entity) {
                return Err(FunctionalError::IllegalApplication {
                    line,
                    term: term.name.clone(),
                    instance: arg.to_string(),
                    entity: entity.to_string(),
                });
            }
        }
        self.relations.push(RelationPhrase {
            relation: term.name.clone(),
            arguments: arguments.into_iter().map(str::to_string).collect(),
        });
        Ok(())
    }

    fn attribute(&mut self, line: usize, tokens: &[&str]) -> Result<(), FunctionalError> {
        let term = self
            .vocabulary
            .lookup_term(tokens[1])
            .expect("dispatched on a known attribute");
        if tokens.len() != 3 {
            return Err(FunctionalError::Syntax {
                line,
                message: format!("expected `<id> {} <value>`", term.name),
            });
        }
        let (instance, value) = (tokens[0], tokens[2]);
        let entity = self.entity_of(line, instance)?;
        if !term.applies_to().iter().any(|t| t == entity) {
            return Err(FunctionalError::IllegalApplication {
                line,
                term: term.name.clone(),
                instance: instance.to_string(),
                entity: entity.to_string(),
            });
        }
        if !term.allowed_values().iter().any(|v| v == value) {
            return Err(FunctionalError::IllegalAttributeValue {
                line,
                attribute: term.name.clone(),
                value: value.to_string(),
                allowed: term.allowed_values().to_vec(),
            });
        }
        if !self
            .assigned
            .insert((instance.to_string(), term.name.clone()))
        {
            return Err(FunctionalError::DuplicateAttribute {
                line,
                instance: instance.to_string(),
                attribute: term.name.clone(),
            });
        }
        self.attributes.push(AttributeAssignment {
            instance_id: instance.to_string(),
            attribute: term.name.clone(),
            value: value.to_string(),
        });
        Ok(())
    }
}

/// Parse DSL text against a vocabulary.
pub fn parse_functional(dsl: &str, v: &Vocabulary) -> Result<FunctionalScenario, FunctionalError> {
    let mut parser = Parser {
        vocabulary: v,
        scenario_id: None,
        instances: Vec::new(),
        declared: BTreeMap::new(),
        relations: Vec::new(),
        attributes: Vec::new(),
        assigned: BTreeSet::new(),
    };
    let mut last_line = 0;
    for (line, tokens) in statements(dsl) {
        last_line = line;
        parser.statement(line, &tokens)?;
    }
    let scenario_id = parser.scenario_id.ok_or(FunctionalError::Syntax {
        line: last_line.max(1),
        message: "missing `scenario <id>` header".into(),
    })?;
    Ok(FunctionalScenario {
        scenario_id,
        vocabulary_ref: v.reference(),
        instances: parser.instances,
        relations: parser.relations,
        attributes: parser.attributes,
    })
}

impl FunctionalScenario {
    /// Render as DSL text: header, declarations, attributes, relations.
    /// `parse_functional` on the result yields an equal scenario.
    pub fn to_dsl(&self) -> String {
        let mut out = format!("scenario {}\n", self.scenario_id);
        for instance in &self.instances {
            match &instance.label {
                Some(label) => {
                    let _ = writeln!(out, "{label} {} is {}", instance.instance_id, instance.term);
                }
                None => {
                    let _ = writeln!(out, "{} {}", instance.term, instance.instance_id);
                }
            }
        }
        for assignment in &self.attributes {
            let _ = writeln!(out, "{}", assignment.text());
        }
        for relation in &self.relations {
            let _ = writeln!(out, "{}", relation.text());
        }
        out
    }

    pub fn instance(&self, id: &str) -> Option<&EntityInstance> {
        self.instances.iter().find(|i| i.instance_id == id)
    }

    pub fn attribute_value(&self, instance: &str, attribute: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| a.instance_id == instance && a.attribute == attribute)
            .map(|a| a.value.as_str())
    }

    pub fn to_canonical_json(&self) -> Result<String, FormatError> {
        let fs = self.clone();
        canon::to_canonical_string(&FunctionalDocument {
            format: FORMAT.into(),
            scenario_id: fs.scenario_id,
            vocabulary_ref: fs.vocabulary_ref,
            instances: fs.instances,
            relations: fs.relations,
            attributes: fs.attributes,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let tree = canon::parse_json(text)?;
        canon::expect_format(&tree, FORMAT)?;
        let doc: FunctionalDocument = canon::from_tree(tree)?;
        Ok(FunctionalScenario {
            scenario_id: doc.scenario_id,
            vocabulary_ref: doc.vocabulary_ref,
            instances: doc.instances,
            relations: doc.relations,
            attributes: doc.attributes,
        })
    }

    /// SHA-256 of the canonical encoding.
    pub fn content_hash(&self) -> Result<String, FormatError> {
        Ok(canon::sha256_hex(self.to_canonical_json()?.as_bytes()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalDocument {
    format: String,
    scenario_id: String,
    vocabulary_ref: VocabularyRef,
    instances: Vec<EntityInstance>,
    relations: Vec<RelationPhrase>,
    attributes: Vec<AttributeAssignment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    VocabularyMismatch,
    DuplicateInstance,
    UnknownTerm,
    UnknownInstance,
    ArityMismatch,
    IllegalApplication,
    IllegalAttributeValue,
    DuplicateAttribute,
    MissingRequiredAttribute,
    MutualExclusion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    /// Offending element ids: instance ids, or statement texts for
    /// relation and attribute findings.
    pub elements: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub scenario_id: String,
    pub findings: Vec<Finding>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, code: FindingCode, elements: Vec<String>, message: String) {
        self.findings.push(Finding {
            code,
            elements,
            message,
        });
    }
}

/// A statement of the scenario that an exclusion pattern can match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum StatementRef {
    Attribute(usize),
    Relation(usize),
}

/// Type invariants, required attributes and the vocabulary's exclusion
/// table. Works on hand-built scenarios too, so it rechecks everything the
/// parser enforces.
pub fn check_consistency(fs: &FunctionalScenario, v: &Vocabulary) -> ConsistencyReport {
    let mut report = ConsistencyReport {
        scenario_id: fs.scenario_id.clone(),
        findings: Vec::new(),
    };
    if fs.vocabulary_ref != v.reference() {
        report.push(
            FindingCode::VocabularyMismatch,
            vec![fs.scenario_id.clone()],
            format!(
                "scenario is written against {}, vocabulary is {}",
                fs.vocabulary_ref,
                v.reference()
            ),
        );
    }

    let mut entity_of: BTreeMap<&str, &str> = BTreeMap::new();
    for instance in &fs.instances {
        if entity_of
            .insert(&instance.instance_id, &instance.term)
            .is_some()
        {
            report.push(
                FindingCode::DuplicateInstance,
                vec![instance.instance_id.clone()],
                format!("instance `{}` declared twice", instance.instance_id),
            );
        }
        if v.lookup_kind(&instance.term, TermKind::Entity).is_none() {
            report.push(
                FindingCode::UnknownTerm,
                vec![instance.instance_id.clone()],
                format!("`{}` is not an entity term", instance.term),
            );
        }
    }

    for relation in &fs.relations {
        let text = relation.text();
        let Some(term) = v.lookup_kind(&relation.relation, TermKind::Relation) else {
            report.push(
                FindingCode::UnknownTerm,
                vec![text],
                format!("`{}` is not a relation term", relation.relation),
            );
            continue;
        };
        if term.arity() != Some(relation.arguments.len()) {
            report.push(
                FindingCode::ArityMismatch,
                vec![text.clone()],
                format!(
                    "`{}` takes {} arguments",
                    term.name,
                    term.arity().unwrap_or(0)
                ),
            );
        }
        for arg in &relation.arguments {
            match entity_of.get(arg.as_str()) {
                None => report.push(
                    FindingCode::UnknownInstance,
                    vec![text.clone(), arg.clone()],
                    format!("`{arg}` is not declared"),
                ),
                Some(entity) if !term.applies_to().iter().any(|t| t == entity) => report.push(
                    FindingCode::IllegalApplication,
                    vec![text.clone(), arg.clone()],
                    format!("`{}` does not apply to `{entity}`", term.name),
                ),
                Some(_) => {}
            }
        }
    }

    let mut assigned = BTreeSet::new();
    for assignment in &fs.attributes {
        let text = assignment.text();
        if !assigned.insert((assignment.instance_id.as_str(), assignment.attribute.as_str())) {
            report.push(
                FindingCode::DuplicateAttribute,
                vec![text.clone()],
                format!(
                    "`{}` of `{}` assigned more than once",
                    assignment.attribute, assignment.instance_id
                ),
            );
        }
        let Some(term) = v.lookup_kind(&assignment.attribute, TermKind::Attribute) else {
            report.push(
                FindingCode::UnknownTerm,
                vec![text],
                format!("`{}` is not an attribute term", assignment.attribute),
            );
            continue;
        };
        match entity_of.get(assignment.instance_id.as_str()) {
            None => report.push(
                FindingCode::UnknownInstance,
                vec![text.clone(), assignment.instance_id.clone()],
                format!("`{}` is not declared", assignment.instance_id),
            ),
            Some(entity) if !term.applies_to().iter().any(|t| t == entity) => report.push(
                FindingCode::IllegalApplication,
                vec![text.clone(), assignment.instance_id.clone()],
                format!("`{}` does not apply to `{entity}`", term.name),
            ),
            Some(_) => {}
        }
        if !term.allowed_values().contains(&assignment.value) {
            report.push(
                FindingCode::IllegalAttributeValue,
                vec![text],
                format!("`{}` is not an allowed value", assignment.value),
            );
        }
    }

    for instance in &fs.instances {
        for term in v.terms().filter(|t| t.is_required()) {
            if term.applies_to().contains(&instance.term)
                && fs
                    .attribute_value(&instance.instance_id, &term.name)
                    .is_none()
            {
                report.push(
                    FindingCode::MissingRequiredAttribute,
                    vec![instance.instance_id.clone(), term.name.clone()],
                    format!(
                        "`{}` requires a `{}` assignment",
                        instance.instance_id, term.name
                    ),
                );
            }
        }
    }

    for rule in v.exclusions() {
        let firsts = matches(fs, &rule.first);
        let seconds = matches(fs, &rule.second);
        let mut fired = BTreeSet::new();
        for (a, bind_a) in &firsts {
            for (b, bind_b) in &seconds {
                if a != b && compatible(bind_a, bind_b) {
                    fired.insert(if a < b { (*a, *b) } else { (*b, *a) });
                }
            }
        }
        for (a, b) in fired {
            let (ta, tb) = (statement_text(fs, a), statement_text(fs, b));
            report.push(
                FindingCode::MutualExclusion,
                vec![ta.clone(), tb.clone()],
                format!(
                    "`{ta}` and `{tb}` may not co-occur (rule `{}` / `{}`)",
                    rule.first, rule.second
                ),
            );
        }
    }
    report
}

fn statement_text(fs: &FunctionalScenario, s: StatementRef) -> String {
    match s {
        StatementRef::Attribute(i) => fs.attributes[i].text(),
        StatementRef::Relation(i) => fs.relations[i].text(),
    }
}

type Binding<'a> = BTreeMap<&'a str, &'a str>;

fn matches<'a>(fs: &'a FunctionalScenario, pattern: &'a Pattern) -> Vec<(StatementRef, Binding<'a>)> {
    let mut out = Vec::new();
    match pattern {
        Pattern::Relation { relation, args } => {
            for (i, phrase) in fs.relations.iter().enumerate() {
                if &phrase.relation != relation || phrase.arguments.len() != args.len() {
                    continue;
                }
                let binding: Binding = args
                    .iter()
                    .map(String::as_str)
                    .zip(phrase.arguments.iter().map(String::as_str))
                    .collect();
                if injective(&binding) {
                    out.push((StatementRef::Relation(i), binding));
                }
            }
        }
        Pattern::Attribute {
            attribute,
            subject,
            value,
        } => {
            for (i, assignment) in fs.attributes.iter().enumerate() {
                if &assignment.attribute == attribute && &assignment.value == value {
                    let binding =
                        BTreeMap::from([(subject.as_str(), assignment.instance_id.as_str())]);
                    out.push((StatementRef::Attribute(i), binding));
                }
            }
        }
    }
    out
}

fn injective(binding: &Binding) -> bool {
    let targets: BTreeSet<_> = binding.values().collect();
    targets.len() == binding.len()
}

fn compatible(a: &Binding, b: &Binding) -> bool {
    let mut merged = a.clone();
    for (var, target) in b {
        match merged.get(var) {
            Some(existing) if existing != target => return false,
            _ => {
                merged.insert(var, target);
            }
        }
    }
    injective(&merged)
}

/// Cartesian product over the allowed values of the varied attributes, in
/// lexicographic order (first pair most significant, values in vocabulary
/// order). Combinations that fail the consistency check are dropped. With
/// a non-empty `vary`, each variant's id gets a `-v<n>` suffix where `n` is
/// its 1-based position in the full product.
pub fn enumerate_variations(
    fs: &FunctionalScenario,
    v: &Vocabulary,
    vary: &[(String, String)],
) -> Result<Vec<FunctionalScenario>, FunctionalError> {
    let mut axes: Vec<(usize, &[String])> = Vec::with_capacity(vary.len());
    let mut seen = BTreeSet::new();
    for (instance, attribute) in vary {
        let target_err = |reason: &str| FunctionalError::UnknownVariationTarget {
            instance: instance.clone(),
            attribute: attribute.clone(),
            reason: reason.to_string(),
        };
        if !seen.insert((instance, attribute)) {
            return Err(target_err("listed more than once"));
        }
        let index = fs
            .attributes
            .iter()
            .position(|a| &a.instance_id == instance && &a.attribute == attribute)
            .ok_or_else(|| target_err("not assigned in the scenario"))?;
        let term = v
            .lookup_kind(attribute, TermKind::Attribute)
            .ok_or_else(|| target_err("not an attribute of the vocabulary"))?;
        axes.push((index, term.allowed_values()));
    }

    if axes.is_empty() {
        return Ok(if check_consistency(fs, v).is_consistent() {
            vec![fs.clone()]
        } else {
            Vec::new()
        });
    }

    let mut out = Vec::new();
    let mut odometer = vec![0usize; axes.len()];
    let mut ordinal = 0usize;
    loop {
        ordinal += 1;
        let mut variant = fs.clone();
        variant.scenario_id = format!("{}-v{ordinal}", fs.scenario_id);
        for ((index, values), choice) in axes.iter().zip(&odometer) {
            variant.attributes[*index].value = values[*choice].clone();
        }
        if check_consistency(&variant, v).is_consistent() {
            out.push(variant);
        }

        let mut digit = axes.len();
        loop {
            if digit == 0 {
                return Ok(out);
            }
            digit -= 1;
            odometer[digit] += 1;
            if odometer[digit] < axes[digit].1.len() {
                break;
            }
            odometer[digit] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocabulary::load_vocabulary;

    const VOCAB: &str = r#"{
        "domain_name": "highway", "version": "1",
        "terms": [
            {"name": "car", "kind": "entity"},
            {"name": "truck", "kind": "entity"},
            {"name": "two-lane-motorway", "kind": "entity"},
            {"name": "follows", "kind": "relation", "arity": 2, "applies_to": ["car", "truck"]},
            {"name": "geometry", "kind": "attribute", "allowed_values": ["straight", "curve"],
             "applies_to": ["two-lane-motorway"], "required": true},
            {"name": "lane", "kind": "attribute", "allowed_values": ["left", "right"],
             "applies_to": ["car", "truck"]},
            {"name": "weather", "kind": "attribute", "allowed_values": ["dry", "wet", "snow"],
             "applies_to": ["two-lane-motorway"]}
        ],
        "exclusions": [
            {"first": {"relation": "follows", "args": ["a", "b"]},
             "second": {"relation": "follows", "args": ["b", "a"]}}
        ]
    }"#;

    const FIG3: &str = "scenario s1 / road r1 is two-lane-motorway / r1 geometry curve / car c1 / truck t1 / c1 follows t1 / c1 lane right / t1 lane right";

    fn vocab() -> Vocabulary {
        load_vocabulary(VOCAB).unwrap()
    }

    #[test]
    fn parses_worked_example() {
        let fs = parse_functional(FIG3, &vocab()).unwrap();
        assert_eq!(fs.scenario_id, "s1");
        assert_eq!(fs.instances.len(), 3);
        assert_eq!(fs.relations.len(), 1);
        assert_eq!(fs.attributes.len(), 3);
        assert_eq!(fs.instances[0].label.as_deref(), Some("road"));
        assert_eq!(fs.relations[0].arguments, ["c1", "t1"]);
        assert!(check_consistency(&fs, &vocab()).is_consistent());
    }

    #[test]
    fn empty_scenario() {
        let fs = parse_functional("scenario s0", &vocab()).unwrap();
        assert!(fs.instances.is_empty() && fs.relations.is_empty() && fs.attributes.is_empty());
    }

    #[test]
    fn unknown_relation_names_word_and_line() {
        let err = parse_functional("scenario s\ncar c1\ntruck t1\nc1 overtakes t1\n", &vocab())
            .unwrap_err();
        match &err {
            FunctionalError::UnknownTerm { line, word, .. } => {
                assert_eq!((*line, word.as_str()), (4, "overtakes"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("overtakes"));
    }

    #[test]
    fn typo_gets_a_hint() {
        let err = parse_functional("scenario s / car c1 / truck t1 / c1 folows t1", &vocab())
            .unwrap_err();
        assert!(matches!(err, FunctionalError::UnknownTerm { hint: Some(ref h), .. } if h == "follows"));
    }

    type ErrorCase = (&'static str, fn(&FunctionalError) -> bool);

    #[test]
    fn parse_errors() {
        let v = vocab();
        let cases: &[ErrorCase] = &[
            ("car c1", |e| matches!(e, FunctionalError::Syntax { .. })),
            ("scenario a / scenario b", |e| matches!(e, FunctionalError::Syntax { .. })),
            ("scenario a / car c1 / car c1", |e| {
                matches!(e, FunctionalError::DuplicateInstance { first_line: 1, .. })
            }),
            ("scenario a / car c1 / c1 follows", |e| {
                matches!(e, FunctionalError::ArityMismatch { expected: 2, found: 1, .. })
            }),
            ("scenario a / car c1 / c1 lane middle", |e| {
                matches!(e, FunctionalError::IllegalAttributeValue { .. })
            }),
            ("scenario a / car c1 / c1 geometry curve", |e| {
                matches!(e, FunctionalError::IllegalApplication { .. })
            }),
            ("scenario a / car c1 / two-lane-motorway r / c1 follows r", |e| {
                matches!(e, FunctionalError::IllegalApplication { .. })
            }),
            ("scenario a / car c1 / c1 follows t9", |e| {
                matches!(e, FunctionalError::UnknownInstance { .. })
            }),
            ("scenario a / x1 follows c1", |e| {
                matches!(e, FunctionalError::UnknownInstance { .. })
            }),
            ("scenario a / bus b1", |e| matches!(e, FunctionalError::UnknownTerm { .. })),
            ("scenario a / car c1 / c1 lane left / c1 lane right", |e| {
                matches!(e, FunctionalError::DuplicateAttribute { .. })
            }),
            ("scenario a / car truck", |e| matches!(e, FunctionalError::Syntax { .. })),
            ("scenario a / car C1", |e| matches!(e, FunctionalError::Syntax { .. })),
            ("# only a comment", |e| matches!(e, FunctionalError::Syntax { .. })),
        ];
        for (src, check) in cases {
            let err = parse_functional(src, &v).unwrap_err();
            assert!(check(&err), "{src}: {err:?}");
        }
    }

    #[test]
    fn comments_and_line_numbers() {
        let src = "# header comment\nscenario s # trailing\n\ncar c1 / car c1\n";
        let err = parse_functional(src, &vocab()).unwrap_err();
        assert_eq!(err.line(), Some(4));
    }

    #[test]
    fn mutual_follows_is_one_finding() {
        let src = "scenario s / car c1 / truck t1 / c1 follows t1 / t1 follows c1";
        let report = check_consistency(&parse_functional(src, &vocab()).unwrap(), &vocab());
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].code, FindingCode::MutualExclusion);
        assert_eq!(report.findings[0].elements, ["c1 follows t1", "t1 follows c1"]);
    }

    #[test]
    fn follows_antisymmetry_matches_brute_force() {
        // Every subset of the four directed `follows` phrases over {c1, c2}
        // plus self-loops; a finding must fire exactly for each unordered
        // pair {x, y}, x != y, with both directions present.
        let v = vocab();
        let phrases = [("c1", "c2"), ("c2", "c1"), ("c1", "c1"), ("c2", "c2")];
        for mask in 0u32..16 {
            let mut src = String::from("scenario s / car c1 / car c2");
            let chosen: Vec<_> = phrases
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, p)| *p)
                .collect();
            for (a, b) in &chosen {
                src.push_str(&format!(" / {a} follows {b}"));
            }
            let expected = usize::from(chosen.contains(&("c1", "c2")) && chosen.contains(&("c2", "c1")));
            let report = check_consistency(&parse_functional(&src, &v).unwrap(), &v);
            let fired = report
                .findings
                .iter()
                .filter(|f| f.code == FindingCode::MutualExclusion)
                .count();
            assert_eq!(fired, expected, "{src}");
        }
    }

    #[test]
    fn missing_required_attribute() {
        let src = "scenario s / two-lane-motorway r1 / car c1";
        let report = check_consistency(&parse_functional(src, &vocab()).unwrap(), &vocab());
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].code, FindingCode::MissingRequiredAttribute);
        assert_eq!(report.findings[0].elements, ["r1", "geometry"]);
    }

    #[test]
    fn hand_built_scenarios_are_rechecked() {
        let mut fs = parse_functional(FIG3, &vocab()).unwrap();
        fs.relations.push(RelationPhrase {
            relation: "follows".into(),
            arguments: vec!["c1".into(), "r1".into()],
        });
        fs.attributes[0].value = "wiggly".into();
        fs.vocabulary_ref.version = "2".into();
        let codes: BTreeSet<_> = check_consistency(&fs, &vocab())
            .findings
            .iter()
            .map(|f| f.code)
            .collect();
        assert_eq!(
            codes,
            BTreeSet::from([
                FindingCode::VocabularyMismatch,
                FindingCode::IllegalApplication,
                FindingCode::IllegalAttributeValue
            ])
        );
    }

    #[test]
    fn variations() {
        let v = vocab();
        let fs = parse_functional(FIG3, &v).unwrap();
        let two = enumerate_variations(&fs, &v, &[("r1".into(), "geometry".into())]).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].attribute_value("r1", "geometry"), Some("straight"));
        assert_eq!(two[1].attribute_value("r1", "geometry"), Some("curve"));

        assert_eq!(enumerate_variations(&fs, &v, &[]).unwrap(), vec![fs.clone()]);

        let with_weather = parse_functional(&format!("{FIG3} / r1 weather dry"), &v).unwrap();
        let six = enumerate_variations(
            &with_weather,
            &v,
            &[("r1".into(), "geometry".into()), ("r1".into(), "weather".into())],
        )
        .unwrap();
        assert_eq!(six.len(), 6);
        let order: Vec<_> = six
            .iter()
            .map(|s| {
                (
                    s.attribute_value("r1", "geometry").unwrap(),
                    s.attribute_value("r1", "weather").unwrap(),
                )
            })
            .collect();
        assert_eq!(order[0], ("straight", "dry"));
        assert_eq!(order[1], ("straight", "wet"));
        assert_eq!(order[3], ("curve", "dry"));

        assert!(matches!(
            enumerate_variations(&fs, &v, &[("r1".into(), "weather".into())]),
            Err(FunctionalError::UnknownVariationTarget { .. })
        ));
    }

    #[test]
    fn dsl_round_trip() {
        let v = vocab();
        let fs = parse_functional(FIG3, &v).unwrap();
        assert_eq!(parse_functional(&fs.to_dsl(), &v).unwrap(), fs);
        let json = fs.to_canonical_json().unwrap();
        assert_eq!(FunctionalScenario::from_json(&json).unwrap(), fs);
    }
}
