//! Seeded random generators for every document type, for property and
//! acceptance tests. Enabled by the `test-support` feature.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::concretize::{ConcreteScenario, Method};
use crate::expr::{Comparator, Expr, Inequality};
use crate::functional::{parse_functional, FunctionalScenario};
use crate::logical::{
    Constraint, ConstraintForm, Correlation, Distribution, LogicalScenario, Parameter,
    ParameterKind, Provenance, Range, SourceRef,
};
use crate::testcase::{Check, ExpectedBehavior, Preconditions, TestCase, TimeSeries};
use crate::vocabulary::{ExclusionRule, Pattern, Term, TermSpec, Vocabulary};

/// Any finite binary64, including subnormals and signed zeros.
pub fn any_finite(rng: &mut impl Rng) -> f64 {
    loop {
        let x = f64::from_bits(rng.gen());
        if x.is_finite() {
            return x;
        }
    }
}

/// A value that is sometimes wild and usually human-sized.
pub fn any_value(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => any_finite(rng),
        1 => rng.gen_range(-10.0..10.0),
        2 => f64::from(rng.gen_range(-1000..1000)),
        _ => rng.gen_range(-1e6..1e6),
    }
}

pub fn identifier(rng: &mut impl Rng, prefix: &str) -> String {
    const TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_-";
    let len = rng.gen_range(0..6);
    let tail: String = (0..len)
        .map(|_| char::from(*TAIL.choose(rng).expect("non-empty")))
        .collect();
    format!("{prefix}{tail}")
}

/// Free text with quotes, escapes and non-ASCII characters.
pub fn text(rng: &mut impl Rng) -> String {
    const PIECES: &[&str] = &[
        "car", " ", "follows", "\"quoted\"", "back\\slash", "tab\t", "line\n", "ü", "→", "日本", "😀",
        "d_min", "≥", "0.5",
    ];
    let len = rng.gen_range(1..8);
    (0..len).map(|_| *PIECES.choose(rng).expect("non-empty")).collect()
}

pub fn random_vocabulary(rng: &mut impl Rng) -> Vocabulary {
    let entity_count = rng.gen_range(1..6);
    let entities: Vec<String> = (0..entity_count).map(|i| format!("e{i}-{}", identifier(rng, "k"))).collect();
    let mut terms: Vec<Term> = entities
        .iter()
        .map(|name| Term {
            name: name.clone(),
            spec: TermSpec::Entity,
            description: if rng.gen() { text(rng) } else { String::new() },
        })
        .collect();
    let subset = |rng: &mut dyn rand::RngCore| -> Vec<String> {
        let mut picked: Vec<String> = entities.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
        if picked.is_empty() {
            picked.push(entities[0].clone());
        }
        picked
    };
    let mut binary = None;
    for i in 0..rng.gen_range(0..4) {
        let name = format!("r{i}-{}", identifier(rng, "k"));
        let arity = rng.gen_range(1..4);
        if arity == 2 && binary.is_none() {
            binary = Some(name.clone());
        }
        terms.push(Term {
            name,
            spec: TermSpec::Relation {
                arity,
                applies_to: subset(rng),
            },
            description: String::new(),
        });
    }
    for i in 0..rng.gen_range(0..4) {
        let values = (0..rng.gen_range(1..4)).map(|j| format!("v{j}")).collect();
        terms.push(Term {
            name: format!("a{i}-{}", identifier(rng, "k")),
            spec: TermSpec::Attribute {
                allowed_values: values,
                applies_to: subset(rng),
                required: rng.gen_bool(0.3),
            },
            description: if rng.gen() { text(rng) } else { String::new() },
        });
    }
    terms.shuffle(rng);
    let exclusions = binary
        .filter(|_| rng.gen())
        .map(|relation| {
            vec![ExclusionRule {
                first: Pattern::Relation {
                    relation: relation.clone(),
                    args: vec!["x".into(), "y".into()],
                },
                second: Pattern::Relation {
                    relation,
                    args: vec!["y".into(), "x".into()],
                },
            }]
        })
        .unwrap_or_default();
    Vocabulary::new(&identifier(rng, "d"), &format!("{}", rng.gen_range(1..20)), terms, exclusions)
        .expect("generated vocabulary is well formed")
}

/// A scenario that parses against `v`, built as DSL text.
pub fn random_functional(rng: &mut impl Rng, v: &Vocabulary) -> FunctionalScenario {
    let entities: Vec<&Term> = v.terms().filter(|t| matches!(t.spec, TermSpec::Entity)).collect();
    let mut lines = vec![format!("scenario {}", identifier(rng, "s"))];
    let mut instances: Vec<(String, String)> = Vec::new();
    for i in 0..rng.gen_range(0..6) {
        let term = entities.choose(rng).expect("at least one entity");
        let id = format!("i{i}");
        lines.push(match rng.gen_range(0..3) {
            0 => format!("{} {id}", term.name),
            1 => format!("{id} is {}", term.name),
            _ => format!("thing {id} is {}", term.name),
        });
        instances.push((id, term.name.clone()));
    }
    for term in v.terms() {
        let of = |entity: &str| -> Vec<&String> {
            instances.iter().filter(|(_, t)| t == entity).map(|(id, _)| id).collect()
        };
        let candidates: Vec<&String> = term.applies_to().iter().flat_map(|e| of(e)).collect();
        if candidates.is_empty() {
            continue;
        }
        match &term.spec {
            TermSpec::Relation { arity, .. } => {
                for _ in 0..rng.gen_range(0..3) {
                    let args: Vec<&str> = (0..*arity)
                        .map(|_| candidates.choose(rng).expect("non-empty").as_str())
                        .collect();
                    lines.push(format!("{} {} {}", args[0], term.name, args[1..].join(" ")).trim_end().to_string());
                }
            }
            TermSpec::Attribute { allowed_values, .. } => {
                for subject in candidates {
                    if rng.gen() {
                        continue;
                    }
                    let value = allowed_values.choose(rng).expect("non-empty");
                    lines.push(format!("{subject} {} {value}", term.name));
                }
            }
            TermSpec::Entity => {}
        }
    }
    let separator = if rng.gen() { "\n" } else { " / " };
    parse_functional(&lines.join(separator), v).expect("generated DSL parses")
}

fn random_distribution(rng: &mut impl Rng, range: Range) -> Option<Distribution> {
    match rng.gen_range(0..3) {
        0 => None,
        1 => Some(Distribution::Uniform),
        _ => Some(Distribution::TruncatedGaussian {
            mean: if range.is_point() {
                range.lo
            } else {
                rng.gen_range(range.lo..=range.hi)
            },
            stddev: (range.hi - range.lo).max(1.0) * rng.gen_range(0.05..2.0),
        }),
    }
}

/// A logical scenario with up to `max_params` parameters and up to
/// `max_constraints` constraints, all satisfied by a hidden witness point,
/// so the feasible region is never empty.
pub fn random_logical(rng: &mut impl Rng, max_params: usize, max_constraints: usize) -> LogicalScenario {
    let count = rng.gen_range(1..=max_params.max(1));
    let mut parameters = Vec::with_capacity(count);
    let mut witness = BTreeMap::new();
    for i in 0..count {
        let lo = f64::from(rng.gen_range(-50..50));
        let range = if rng.gen_bool(0.1) {
            Range::new(lo, lo)
        } else {
            Range::new(lo, lo + f64::from(rng.gen_range(1..100)) * rng.gen_range(0.1..1.0))
        };
        let instance = format!("i{}", i / 2);
        let name = format!("{instance}.p{i}");
        witness.insert(name.clone(), if range.is_point() { range.lo } else { rng.gen_range(range.lo..=range.hi) });
        parameters.push(Parameter {
            name,
            unit: ["m", "m/s", "s", "1"].choose(rng).expect("non-empty").to_string(),
            range,
            distribution: random_distribution(rng, range),
            kind: if rng.gen() { ParameterKind::ScalarStatic } else { ParameterKind::ScalarInitial },
            provenance: Provenance::Instance {
                instance,
                term: "thing".into(),
            },
        });
    }
    let names: Vec<String> = parameters.iter().map(|p| p.name.clone()).collect();
    let lookup = |name: &str| witness.get(name).copied();

    let mut constraints = Vec::new();
    for index in 0..rng.gen_range(0..=max_constraints) {
        let form = if names.len() >= 2 && rng.gen_bool(0.25) {
            let mut pair = names.choose_multiple(rng, 2);
            let (target, source) = (pair.next().expect("two").clone(), pair.next().expect("two").clone());
            let slope = f64::from(rng.gen_range(-20..=20)) / 10.0;
            let residual = witness[&target] - slope * witness[&source];
            let width = parameters.iter().find(|p| p.name == target).expect("own").range;
            ConstraintForm::Correlation(Correlation {
                target,
                source,
                slope,
                offset: residual.round(),
                tolerance: (residual - residual.round()).abs() + (width.hi - width.lo) * 0.5 + 1.0,
            })
        } else {
            let width = rng.gen_range(1..=names.len().min(3));
            let terms: Vec<Expr> = names
                .choose_multiple(rng, width)
                .map(|name| {
                    let coefficient = f64::from(rng.gen_range(1..=3) * if rng.gen() { 1 } else { -1 });
                    if coefficient == 1.0 {
                        Expr::Var(name.clone())
                    } else {
                        Expr::Mul(Box::new(Expr::Num(coefficient)), Box::new(Expr::Var(name.clone())))
                    }
                })
                .collect();
            let lhs = terms
                .into_iter()
                .reduce(|a, b| Expr::Add(Box::new(a), Box::new(b)))
                .expect("at least one term");
            let at = lhs.eval(&lookup).expect("witness covers every name");
            let slack = f64::from(rng.gen_range(0..20));
            let (comparator, bound) = match rng.gen_range(0..4) {
                0 => (Comparator::Lt, (at + slack + 1.0).ceil()),
                1 => (Comparator::Le, (at + slack).ceil()),
                2 => (Comparator::Gt, (at - slack - 1.0).floor()),
                _ => (Comparator::Ge, (at - slack).floor()),
            };
            ConstraintForm::Inequality(Inequality {
                lhs,
                comparator,
                rhs: Expr::Num(bound),
            })
        };
        debug_assert_eq!(form.holds(&lookup), Some(true));
        constraints.push(Constraint {
            id: format!("k{index}"),
            form,
            provenance: Provenance::Relation {
                relation: "near".into(),
                arguments: vec!["i0".into()],
            },
        });
    }
    LogicalScenario {
        scenario_id: identifier(rng, "ls"),
        source_ref: SourceRef {
            id: identifier(rng, "fs"),
            hash: hex64(rng),
        },
        parameters,
        constraints,
    }
}

fn hex64(rng: &mut impl Rng) -> String {
    (0..32).map(|_| format!("{:02x}", rng.gen::<u8>())).collect()
}

/// A structurally valid concrete scenario with arbitrary values; it need
/// not satisfy any logical scenario.
pub fn random_concrete(rng: &mut impl Rng) -> ConcreteScenario {
    let assignments = (0..rng.gen_range(0..8))
        .map(|i| (format!("i{}.p{i}", i / 2), any_value(rng)))
        .collect();
    let method = *[Method::Boundary, Method::Equivalence, Method::Pairwise, Method::Random]
        .choose(rng)
        .expect("non-empty");
    ConcreteScenario {
        scenario_id: identifier(rng, "cs"),
        source_ref: SourceRef {
            id: identifier(rng, "ls"),
            hash: hex64(rng),
        },
        assignments,
        method,
        seed: (method == Method::Random).then(|| rng.gen()),
        default_uniform: if method == Method::Random && rng.gen() {
            vec!["i0.p0".into()]
        } else {
            Vec::new()
        },
    }
}

/// A structurally complete test case with arbitrary text and values.
pub fn random_testcase(rng: &mut impl Rng) -> TestCase {
    let length = rng.gen_range(1..6);
    let dt = f64::from(rng.gen_range(1..100)) / 100.0;
    TestCase {
        unique_id: format!("tc-{}", &hex64(rng)[..16]),
        work_product_ref: text(rng),
        preconditions: Preconditions {
            text: text(rng),
            configuration: text(rng),
        },
        environmental_conditions: (0..rng.gen_range(1..4))
            .map(|i| (format!("r{i}.width"), any_value(rng)))
            .collect(),
        input_data: (0..rng.gen_range(1..4))
            .map(|i| TimeSeries {
                parameter: format!("v{i}.s"),
                unit: "m".into(),
                dt,
                samples: (0..length).map(|_| any_value(rng)).collect(),
            })
            .collect(),
        expected: ExpectedBehavior {
            description: text(rng),
            checks: (0..rng.gen_range(1..3))
                .map(|_| Check {
                    signal: text(rng),
                    comparator: *[Comparator::Lt, Comparator::Le, Comparator::Gt, Comparator::Ge, Comparator::Eq]
                        .choose(rng)
                        .expect("non-empty"),
                    bound: any_value(rng),
                    tolerance: any_value(rng).abs(),
                })
                .collect(),
        },
        source_ref: SourceRef {
            id: identifier(rng, "cs"),
            hash: hex64(rng),
        },
    }
}
