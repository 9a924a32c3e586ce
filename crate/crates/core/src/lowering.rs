//! Functional → logical lowering, driven by a parameter catalog.
//!
//! The catalog maps each entity term to parameter templates, each
//! `(attribute, value)` to edits of its instance's parameters, and each
//! relation term to constraint templates over its arguments. Catalog
//! document:
//!
//! ```json
//! {
//!   "vocabulary_ref": {"domain_name": "highway", "version": "1"},
//!   "entities":   {"truck": [{"name": "s0", "unit": "m", "range": [0, 200], "kind": "scalar-initial"}]},
//!   "attributes": {"geometry": {"curve": {"add": [...], "override": {...}, "remove": [...], "constraints": [...]}}},
//!   "relations":  {"follows": {"arguments": ["A", "B"], "constraints": [{"inequality": "B.s0 > A.s0"}]}}
//! }
//! ```
//!
//! Constraint templates name parameters as `<placeholder>.<local_name>`;
//! attribute constraints use the placeholder `self`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;
use crate::error::FormatError;
use crate::expr::Inequality;
use crate::functional::FunctionalScenario;
use crate::logical::{
    Constraint, ConstraintForm, Correlation, Distribution, LogicalScenario, Parameter,
    ParameterKind, Provenance, Range, SourceRef,
};
use crate::vocabulary::{is_identifier, TermKind, Vocabulary, VocabularyRef};

const SELF: &str = "self";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoweringError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("catalog targets vocabulary {found}, expected {expected}")]
    VocabularyMismatch {
        expected: VocabularyRef,
        found: VocabularyRef,
    },
    #[error("catalog {context}: `{term}` is not a known {expected}")]
    UnknownTerm {
        context: String,
        term: String,
        expected: String,
    },
    #[error("{context}: range {range} is empty or not finite")]
    BadRange { context: String, range: Range },
    #[error("{context}: {reason}")]
    BadDistribution { context: String, reason: String },
    #[error("{context}: constraint references `{name}`, which its argument entities cannot produce")]
    UnboundConstraintParameter { context: String, name: String },
    #[error("{context}: {reason}")]
    InvalidTemplate { context: String, reason: String },
    #[error("instance `{instance}`: no parameter templates for entity `{term}`")]
    MissingTemplate { instance: String, term: String },
    #[error("`{phrase}`: constraint needs `{name}`, which this scenario does not define")]
    ConstraintInstantiation { phrase: String, name: String },
    #[error("`{parameter}`: override {replacement} widens base range {base}")]
    OverrideWidensRange {
        parameter: String,
        base: Range,
        replacement: Range,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterTemplate {
    #[serde(rename = "name")]
    pub local_name: String,
    pub unit: String,
    pub range: Range,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Distribution>,
    pub kind: ParameterKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeOverride {
    pub range: Range,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Distribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintTemplate {
    Inequality(Inequality),
    Correlation(Correlation),
}

impl ConstraintTemplate {
    fn form(&self) -> ConstraintForm {
        match self {
            ConstraintTemplate::Inequality(i) => ConstraintForm::Inequality(i.clone()),
            ConstraintTemplate::Correlation(c) => ConstraintForm::Correlation(c.clone()),
        }
    }
}

/// What an attribute value does to the parameters of its instance. Applied
/// in the order remove, add, override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeEffect {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remove: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub add: Vec<ParameterTemplate>,
    #[serde(default, rename = "override", skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, RangeOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationTemplate {
    /// Placeholder names, one per relation argument.
    pub arguments: Vec<String>,
    pub constraints: Vec<ConstraintTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterCatalog {
    pub vocabulary_ref: VocabularyRef,
    #[serde(default)]
    pub entities: BTreeMap<String, Vec<ParameterTemplate>>,
    #[serde(default)]
    pub attributes: BTreeMap<String, BTreeMap<String, AttributeEffect>>,
    #[serde(default)]
    pub relations: BTreeMap<String, RelationTemplate>,
}

impl ParameterCatalog {
    /// Entity terms of the vocabulary that no template mentions. Not an
    /// error; lowering fails only if a scenario instantiates one.
    pub fn unreferenced_entities<'v>(&self, v: &'v Vocabulary) -> Vec<&'v str> {
        v.terms()
            .filter(|t| t.kind() == TermKind::Entity && !self.entities.contains_key(&t.name))
            .map(|t| t.name.as_str())
            .collect()
    }

    pub fn to_canonical_json(&self) -> Result<String, FormatError> {
        canon::to_canonical_string(self)
    }
}

fn check_template_set<'a>(
    context: &str,
    templates: impl IntoIterator<Item = &'a ParameterTemplate>,
) -> Result<(), LoweringError> {
    let mut seen = BTreeSet::new();
    for t in templates {
        let here = format!("{context}, parameter `{}`", t.local_name);
        if !is_identifier(&t.local_name) {
            return Err(LoweringError::InvalidTemplate {
                context: here,
                reason: "parameter names must match [a-z][a-z0-9_-]*".into(),
            });
        }
        if !seen.insert(t.local_name.as_str()) {
            return Err(LoweringError::InvalidTemplate {
                context: here,
                reason: "parameter name repeated".into(),
            });
        }
        if t.unit.trim().is_empty() {
            return Err(LoweringError::InvalidTemplate {
                context: here,
                reason: "unit must not be empty".into(),
            });
        }
        check_range(&here, &t.range, t.distribution.as_ref())?;
    }
    Ok(())
}

fn check_range(context: &str, range: &Range, dist: Option<&Distribution>) -> Result<(), LoweringError> {
    if !range.is_valid() {
        return Err(LoweringError::BadRange {
            context: context.to_string(),
            range: *range,
        });
    }
    if let Some(dist) = dist {
        dist.check(range).map_err(|reason| LoweringError::BadDistribution {
            context: context.to_string(),
            reason,
        })?;
    }
    Ok(())
}

/// Check that every `<placeholder>.<local>` a template mentions resolves.
fn check_constraint_names(
    context: &str,
    template: &ConstraintTemplate,
    producible: &BTreeMap<&str, BTreeSet<String>>,
) -> Result<(), LoweringError> {
    if let ConstraintTemplate::Correlation(c) = template {
        if !c.is_well_formed() {
            return Err(LoweringError::InvalidTemplate {
                context: context.to_string(),
                reason: "correlation needs finite slope, offset and tolerance >= 0".into(),
            });
        }
    }
    for name in template.form().variables() {
        let resolved = name
            .split_once('.')
            .and_then(|(placeholder, local)| producible.get(placeholder).map(|p| p.contains(local)));
        if resolved != Some(true) {
            return Err(LoweringError::UnboundConstraintParameter {
                context: context.to_string(),
                name: name.to_string(),
            });
        }
    }
    Ok(())
}

/// Parse a catalog document and validate it against the vocabulary.
pub fn load_parameter_catalog(source: &str, v: &Vocabulary) -> Result<ParameterCatalog, LoweringError> {
    let tree = canon::parse_json(source)?;
    let catalog: ParameterCatalog = canon::from_tree(tree)?;
    validate_catalog(&catalog, v)?;
    Ok(catalog)
}

pub fn validate_catalog(cat: &ParameterCatalog, v: &Vocabulary) -> Result<(), LoweringError> {
    if cat.vocabulary_ref != v.reference() {
        return Err(LoweringError::VocabularyMismatch {
            expected: v.reference(),
            found: cat.vocabulary_ref.clone(),
        });
    }
    let unknown = |context: &str, term: &str, expected: TermKind| LoweringError::UnknownTerm {
        context: context.to_string(),
        term: term.to_string(),
        expected: expected.to_string(),
    };

    for (term, templates) in &cat.entities {
        if v.lookup_kind(term, TermKind::Entity).is_none() {
            return Err(unknown("entities", term, TermKind::Entity));
        }
        check_template_set(&format!("entity `{term}`"), templates)?;
    }

    // Parameter names each entity can end up with, across all attribute values.
    let mut producible: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for (term, templates) in &cat.entities {
        producible
            .entry(term)
            .or_default()
            .extend(templates.iter().map(|t| t.local_name.clone()));
    }

    for (attribute, values) in &cat.attributes {
        let term = v
            .lookup_kind(attribute, TermKind::Attribute)
            .ok_or_else(|| unknown("attributes", attribute, TermKind::Attribute))?;
        for (value, effect) in values {
            if !term.allowed_values().contains(value) {
                return Err(LoweringError::UnknownTerm {
                    context: format!("attribute `{attribute}`"),
                    term: value.clone(),
                    expected: "allowed value".into(),
                });
            }
            let context = format!("attribute `{attribute} {value}`");
            check_template_set(&context, &effect.add)?;
            for (local, replacement) in &effect.overrides {
                check_range(
                    &format!("{context}, override `{local}`"),
                    &replacement.range,
                    replacement.distribution.as_ref(),
                )?;
            }
            for entity in term.applies_to() {
                producible
                    .entry(entity)
                    .or_default()
                    .extend(effect.add.iter().map(|t| t.local_name.clone()));
            }
        }
    }

    for (attribute, values) in &cat.attributes {
        let term = v.lookup_term(attribute).expect("checked above");
        for (value, effect) in values {
            let context = format!("attribute `{attribute} {value}`");
            for entity in term.applies_to() {
                let mut own: BTreeSet<String> =
                    producible.get(entity.as_str()).cloned().unwrap_or_default();
                own.extend(effect.add.iter().map(|t| t.local_name.clone()));
                let scope = BTreeMap::from([(SELF, own)]);
                for template in &effect.constraints {
                    check_constraint_names(&context, template, &scope)?;
                }
            }
        }
    }

    for (relation, template) in &cat.relations {
        let term = v
            .lookup_kind(relation, TermKind::Relation)
            .ok_or_else(|| unknown("relations", relation, TermKind::Relation))?;
        let context = format!("relation `{relation}`");
        if Some(template.arguments.len()) != term.arity() {
            return Err(LoweringError::InvalidTemplate {
                context,
                reason: format!(
                    "{} placeholders for a relation of arity {}",
                    template.arguments.len(),
                    term.arity().unwrap_or(0)
                ),
            });
        }
        let distinct: BTreeSet<_> = template.arguments.iter().collect();
        if distinct.len() != template.arguments.len()
            || template.arguments.iter().any(|a| a.is_empty() || a.contains('.'))
        {
            return Err(LoweringError::InvalidTemplate {
                context,
                reason: "placeholders must be distinct names without `.`".into(),
            });
        }
        // A placeholder may bind to any entity the relation applies to, so
        // its names must be producible by all of them.
        let common: BTreeSet<String> = term
            .applies_to()
            .iter()
            .map(|e| producible.get(e.as_str()).cloned().unwrap_or_default())
            .reduce(|a, b| a.intersection(&b).cloned().collect())
            .unwrap_or_default();
        let scope: BTreeMap<&str, BTreeSet<String>> = template
            .arguments
            .iter()
            .map(|a| (a.as_str(), common.clone()))
            .collect();
        for constraint in &template.constraints {
            check_constraint_names(&context, constraint, &scope)?;
        }
    }
    Ok(())
}

/// Lower a functional scenario to a logical one.
///
/// Parameters are named `<instance_id>.<local_name>`. Instances are
/// processed in declaration order and templates in catalog order;
/// attribute effects follow the entity templates in assignment order.
pub fn lower_to_logical(
    fs: &FunctionalScenario,
    cat: &ParameterCatalog,
) -> Result<LogicalScenario, LoweringError> {
    if fs.vocabulary_ref != cat.vocabulary_ref {
        return Err(LoweringError::VocabularyMismatch {
            expected: fs.vocabulary_ref.clone(),
            found: cat.vocabulary_ref.clone(),
        });
    }

    let mut parameters = Vec::new();
    let mut constraints: Vec<(ConstraintForm, Provenance, String)> = Vec::new();

    for instance in &fs.instances {
        let id = &instance.instance_id;
        let origin = Provenance::Instance {
            instance: id.clone(),
            term: instance.term.clone(),
        };
        let mut own: Vec<Parameter> = cat
            .entities
            .get(&instance.term)
            .into_iter()
            .flatten()
            .map(|t| instantiate(id, t, origin.clone()))
            .collect();

        for assignment in fs.attributes.iter().filter(|a| &a.instance_id == id) {
            let Some(effect) = cat
                .attributes
                .get(&assignment.attribute)
                .and_then(|values| values.get(&assignment.value))
            else {
                continue;
            };
            let origin = Provenance::Attribute {
                instance: id.clone(),
                attribute: assignment.attribute.clone(),
                value: assignment.value.clone(),
            };
            own.retain(|p| !effect.remove.iter().any(|r| p.name == qualify(id, r)));
            for template in &effect.add {
                let param = instantiate(id, template, origin.clone());
                if own.iter().any(|p| p.name == param.name) {
                    return Err(LoweringError::InvalidTemplate {
                        context: assignment.text(),
                        reason: format!("adds `{}`, which already exists", param.name),
                    });
                }
                own.push(param);
            }
            for (local, replacement) in &effect.overrides {
                let name = qualify(id, local);
                let Some(param) = own.iter_mut().find(|p| p.name == name) else {
                    return Err(LoweringError::InvalidTemplate {
                        context: assignment.text(),
                        reason: format!("overrides `{name}`, which does not exist"),
                    });
                };
                if !param.range.contains_range(&replacement.range) {
                    return Err(LoweringError::OverrideWidensRange {
                        parameter: name,
                        base: param.range,
                        replacement: replacement.range,
                    });
                }
                param.range = replacement.range;
                if replacement.distribution.is_some() {
                    param.distribution = replacement.distribution;
                }
                check_range(&name, &param.range, param.distribution.as_ref())?;
            }
            for template in &effect.constraints {
                let form = template.form().rename(&mut |name: &str| {
                    match name.split_once('.') {
                        Some((SELF, local)) => qualify(id, local),
                        _ => name.to_string(),
                    }
                });
                constraints.push((form, origin.clone(), assignment.text()));
            }
        }

        if own.is_empty() {
            return Err(LoweringError::MissingTemplate {
                instance: id.clone(),
                term: instance.term.clone(),
            });
        }
        parameters.extend(own);
    }

    for phrase in &fs.relations {
        let Some(template) = cat.relations.get(&phrase.relation) else {
            continue;
        };
        let binding: BTreeMap<&str, &str> = template
            .arguments
            .iter()
            .map(String::as_str)
            .zip(phrase.arguments.iter().map(String::as_str))
            .collect();
        for constraint in &template.constraints {
            let form = constraint.form().rename(&mut |name: &str| {
                match name.split_once('.').and_then(|(ph, local)| Some((binding.get(ph)?, local))) {
                    Some((instance, local)) => qualify(instance, local),
                    None => name.to_string(),
                }
            });
            constraints.push((
                form,
                Provenance::Relation {
                    relation: phrase.relation.clone(),
                    arguments: phrase.arguments.clone(),
                },
                phrase.text(),
            ));
        }
    }

    let defined: BTreeSet<&str> = parameters.iter().map(|p| p.name.as_str()).collect();
    for (form, _, phrase) in &constraints {
        if let Some(missing) = form.variables().into_iter().find(|v| !defined.contains(v)) {
            return Err(LoweringError::ConstraintInstantiation {
                phrase: phrase.clone(),
                name: missing.to_string(),
            });
        }
    }

    Ok(LogicalScenario {
        scenario_id: fs.scenario_id.clone(),
        source_ref: SourceRef {
            id: fs.scenario_id.clone(),
            hash: fs.content_hash()?,
        },
        parameters,
        constraints: constraints
            .into_iter()
            .enumerate()
            .map(|(index, (form, provenance, _))| Constraint {
                id: format!("k{index}"),
                form,
                provenance,
            })
            .collect(),
    })
}

fn qualify(instance: &str, local: &str) -> String {
    format!("{instance}.{local}")
}

fn instantiate(instance: &str, t: &ParameterTemplate, provenance: Provenance) -> Parameter {
    Parameter {
        name: qualify(instance, &t.local_name),
        unit: t.unit.clone(),
        range: t.range,
        distribution: t.distribution,
        kind: t.kind,
        provenance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::parse_functional;
    use crate::vocabulary::load_vocabulary;

    const VOCAB: &str = r#"{
        "domain_name": "highway", "version": "1",
        "terms": [
            {"name": "car", "kind": "entity"},
            {"name": "truck", "kind": "entity"},
            {"name": "bus", "kind": "entity"},
            {"name": "two-lane-motorway", "kind": "entity"},
            {"name": "follows", "kind": "relation", "arity": 2, "applies_to": ["car", "truck"]},
            {"name": "geometry", "kind": "attribute", "allowed_values": ["straight", "curve"],
             "applies_to": ["two-lane-motorway"], "required": true},
            {"name": "lane", "kind": "attribute", "allowed_values": ["left", "right"],
             "applies_to": ["car", "truck"]}
        ]
    }"#;

    const CATALOG: &str = r#"{
        "vocabulary_ref": {"domain_name": "highway", "version": "1"},
        "entities": {
            "two-lane-motorway": [
                {"name": "lane_width_right", "unit": "m", "range": [3.0, 3.75], "kind": "scalar-static"},
                {"name": "lane_width_left", "unit": "m", "range": [3.0, 3.75], "kind": "scalar-static"}
            ],
            "car": [
                {"name": "s0", "unit": "m", "range": [0, 200], "kind": "scalar-initial"},
                {"name": "v0", "unit": "m/s", "range": [22.2, 36.1], "kind": "scalar-initial"}
            ],
            "truck": [
                {"name": "s0", "unit": "m", "range": [0, 200], "kind": "scalar-initial"},
                {"name": "v0", "unit": "m/s", "range": [16.666666666666668, 25], "kind": "scalar-initial",
                 "distribution": {"kind": "truncated-gaussian", "mean": 22, "stddev": 2}}
            ]
        },
        "attributes": {
            "geometry": {
                "curve": {"add": [{"name": "curve_radius", "unit": "m", "range": [250, 2000], "kind": "scalar-static"}]},
                "straight": {}
            }
        },
        "relations": {
            "follows": {"arguments": ["A", "B"], "constraints": [{"inequality": "B.s0 > A.s0"}]}
        }
    }"#;

    const FIG3: &str = "scenario s1 / road r1 is two-lane-motorway / r1 geometry curve / car c1 / truck t1 / c1 follows t1 / c1 lane right / t1 lane right";

    fn vocab() -> Vocabulary {
        load_vocabulary(VOCAB).unwrap()
    }

    fn with_catalog(edit: impl FnOnce(&mut serde_json::Value)) -> Result<ParameterCatalog, LoweringError> {
        let mut tree: serde_json::Value = serde_json::from_str(CATALOG).unwrap();
        edit(&mut tree);
        load_parameter_catalog(&tree.to_string(), &vocab())
    }

    #[test]
    fn lowers_worked_example() {
        let v = vocab();
        let cat = load_parameter_catalog(CATALOG, &v).unwrap();
        let fs = parse_functional(FIG3, &v).unwrap();
        let ls = lower_to_logical(&fs, &cat).unwrap();
        let names: Vec<_> = ls.parameters.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "r1.lane_width_right",
                "r1.lane_width_left",
                "r1.curve_radius",
                "c1.s0",
                "c1.v0",
                "t1.s0",
                "t1.v0"
            ]
        );
        assert_eq!(ls.constraints.len(), 1);
        assert_eq!(ls.constraints[0].form.to_string(), "t1.s0 > c1.s0");
        assert_eq!(
            ls.parameter("r1.curve_radius").unwrap().provenance,
            Provenance::Attribute {
                instance: "r1".into(),
                attribute: "geometry".into(),
                value: "curve".into()
            }
        );
        assert_eq!(ls.source_ref.hash, fs.content_hash().unwrap());
    }

    #[test]
    fn straight_geometry_drops_radius() {
        let v = vocab();
        let cat = load_parameter_catalog(CATALOG, &v).unwrap();
        let fs = parse_functional(&FIG3.replace("curve", "straight"), &v).unwrap();
        let ls = lower_to_logical(&fs, &cat).unwrap();
        assert!(ls.parameter("r1.curve_radius").is_none());
        assert_eq!(ls.parameters.len(), 6);
    }

    #[test]
    fn empty_scenario_lowers_to_nothing() {
        let v = vocab();
        let cat = load_parameter_catalog(CATALOG, &v).unwrap();
        let ls = lower_to_logical(&parse_functional("scenario s0", &v).unwrap(), &cat).unwrap();
        assert!(ls.parameters.is_empty() && ls.constraints.is_empty());
    }

    #[test]
    fn missing_template_names_the_term() {
        let v = vocab();
        let cat = load_parameter_catalog(CATALOG, &v).unwrap();
        let fs = parse_functional("scenario s / bus b1", &v).unwrap();
        assert_eq!(
            lower_to_logical(&fs, &cat),
            Err(LoweringError::MissingTemplate {
                instance: "b1".into(),
                term: "bus".into()
            })
        );
    }

    #[test]
    fn point_ranges_are_legal() {
        let cat = with_catalog(|t| t["entities"]["car"][0]["range"] = serde_json::json!([3, 3]));
        assert!(cat.is_ok());
    }

    #[test]
    fn catalog_errors() {
        let bad_dist = with_catalog(|t| {
            t["entities"]["car"][0]["range"] = serde_json::json!([0, 4]);
            t["entities"]["car"][0]["distribution"] =
                serde_json::json!({"kind": "truncated-gaussian", "mean": 5, "stddev": 1});
        });
        assert!(matches!(bad_dist, Err(LoweringError::BadDistribution { .. })));

        let bad_sd = with_catalog(|t| {
            t["entities"]["car"][0]["distribution"] =
                serde_json::json!({"kind": "truncated-gaussian", "mean": 5, "stddev": 0});
        });
        assert!(matches!(bad_sd, Err(LoweringError::BadDistribution { .. })));

        let bad_range = with_catalog(|t| t["entities"]["car"][0]["range"] = serde_json::json!([5, 4]));
        assert!(matches!(bad_range, Err(LoweringError::BadRange { .. })));

        let unknown = with_catalog(|t| t["entities"]["bicycle"] = serde_json::json!([]));
        assert!(matches!(unknown, Err(LoweringError::UnknownTerm { .. })));

        let unknown_value = with_catalog(|t| t["attributes"]["geometry"]["clothoid"] = serde_json::json!({}));
        assert!(matches!(unknown_value, Err(LoweringError::UnknownTerm { .. })));

        let unbound = with_catalog(|t| {
            t["relations"]["follows"]["constraints"][0] = serde_json::json!({"inequality": "B.a0 > A.s0"})
        });
        assert!(matches!(
            unbound,
            Err(LoweringError::UnboundConstraintParameter { ref name, .. }) if name == "B.a0"
        ));

        let unbound_placeholder = with_catalog(|t| {
            t["relations"]["follows"]["constraints"][0] = serde_json::json!({"inequality": "C.s0 > A.s0"})
        });
        assert!(matches!(unbound_placeholder, Err(LoweringError::UnboundConstraintParameter { .. })));

        let arity = with_catalog(|t| t["relations"]["follows"]["arguments"] = serde_json::json!(["A"]));
        assert!(matches!(arity, Err(LoweringError::InvalidTemplate { .. })));

        let dup = with_catalog(|t| {
            let first = t["entities"]["car"][0].clone();
            t["entities"]["car"].as_array_mut().unwrap().push(first);
        });
        assert!(matches!(dup, Err(LoweringError::InvalidTemplate { .. })));

        let mismatch = with_catalog(|t| t["vocabulary_ref"]["version"] = serde_json::json!("2"));
        assert!(matches!(mismatch, Err(LoweringError::VocabularyMismatch { .. })));

        assert!(matches!(
            load_parameter_catalog("{", &vocab()),
            Err(LoweringError::Format(FormatError::Syntax { .. }))
        ));
    }

    #[test]
    fn overrides_narrow_but_never_widen() {
        let v = vocab();
        let fs = parse_functional(FIG3, &v).unwrap();
        let lane_override = |range: serde_json::Value| {
            with_catalog(|t| {
                t["attributes"]["lane"] =
                    serde_json::json!({"right": {"override": {"v0": {"range": range}}}})
            })
            .unwrap()
        };

        // both c1 and t1 are in the right lane; the truck's gaussian mean 22
        // falls outside [23, 24]
        assert!(matches!(
            lower_to_logical(&fs, &lane_override(serde_json::json!([23, 24]))),
            Err(LoweringError::BadDistribution { ref context, .. }) if context == "t1.v0"
        ));

        let left = with_catalog(|t| {
            t["attributes"]["lane"] =
                serde_json::json!({"left": {"override": {"v0": {"range": [23, 24]}}}})
        })
        .unwrap();
        let fs_left = parse_functional(&FIG3.replace("c1 lane right", "c1 lane left"), &v).unwrap();
        let ls = lower_to_logical(&fs_left, &left).unwrap();
        assert_eq!(ls.parameter("c1.v0").unwrap().range, Range::new(23.0, 24.0));
        assert_eq!(ls.parameter("t1.v0").unwrap().range, Range::new(16.666666666666668, 25.0));

        assert!(matches!(
            lower_to_logical(&fs, &lane_override(serde_json::json!([0, 24]))),
            Err(LoweringError::OverrideWidensRange { .. })
        ));
    }

    #[test]
    fn removed_parameter_breaks_constraint_loudly() {
        let v = vocab();
        let fs = parse_functional(FIG3, &v).unwrap();
        let cat = with_catalog(|t| {
            t["attributes"]["lane"] = serde_json::json!({"right": {"remove": ["s0"]}})
        })
        .unwrap();
        assert!(matches!(
            lower_to_logical(&fs, &cat),
            Err(LoweringError::ConstraintInstantiation { ref name, .. }) if name == "c1.s0"
        ));
    }

    #[test]
    fn attribute_correlation_uses_self() {
        let v = vocab();
        let fs = parse_functional(FIG3, &v).unwrap();
        let cat = with_catalog(|t| {
            t["attributes"]["geometry"]["curve"]["constraints"] = serde_json::json!([
                {"correlation": {"target": "self.lane_width_right", "source": "self.curve_radius",
                                 "slope": -0.0002, "offset": 3.8, "tolerance": 0.2}}
            ])
        })
        .unwrap();
        let ls = lower_to_logical(&fs, &cat).unwrap();
        assert_eq!(ls.constraints.len(), 2);
        assert_eq!(
            ls.constraints[0].form.variables(),
            BTreeSet::from(["r1.curve_radius", "r1.lane_width_right"])
        );
        assert_eq!(ls.constraints[0].id, "k0");
        assert_eq!(ls.constraints[1].id, "k1");
    }

    #[test]
    fn lowering_is_deterministic() {
        let v = vocab();
        let cat = load_parameter_catalog(CATALOG, &v).unwrap();
        let fs = parse_functional(FIG3, &v).unwrap();
        let a = lower_to_logical(&fs, &cat).unwrap().to_canonical_json().unwrap();
        let b = lower_to_logical(&fs, &cat).unwrap().to_canonical_json().unwrap();
        assert_eq!(a, b);
    }
}
