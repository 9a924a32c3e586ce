//! Logical → concrete: level selection, pairwise covering, random sampling,
//! and the substitution checker every generator's output must pass.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon;
use crate::error::FormatError;
use crate::logical::{Distribution, LogicalScenario, Parameter, SourceRef};

pub const FORMAT: &str = "concrete/1";
pub const SUITE_FORMAT: &str = "suite/1";

/// Attempts allowed per requested random sample, pooled over the request.
pub const ATTEMPTS_PER_SAMPLE: u64 = 1000;
/// Draws allowed for one truncated-gaussian value before the attempt fails.
const GAUSSIAN_TRIES: u32 = 1000;
/// Largest level grid the pairwise builder enumerates exhaustively.
pub const GRID_LIMIT: u64 = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConcretizeError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("k must be at least 1")]
    BadK,
    #[error("no levels given for `{parameter}`")]
    EmptyLevels { parameter: String },
    #[error("level {value} of `{parameter}` lies outside its range {range}")]
    LevelOutOfRange {
        parameter: String,
        value: f64,
        range: crate::logical::Range,
    },
    #[error("levels given for `{parameter}`, which the scenario does not declare")]
    UnknownParameter { parameter: String },
    #[error("no combination of levels satisfies the constraints{}", blame(.constraints))]
    InfeasibleLevels { constraints: Vec<String> },
    #[error(
        "sampling exhausted: {accepted} of {requested} scenarios accepted after {attempts} attempts; \
         the feasible region is empty or nearly so"
    )]
    SamplingExhausted {
        requested: usize,
        accepted: usize,
        attempts: u64,
    },
    #[error("scenario refers to {found}, expected {expected}")]
    SourceMismatch { expected: String, found: String },
}

fn blame(constraints: &[String]) -> String {
    if constraints.is_empty() {
        String::new()
    } else {
        format!(" (always violated: {})", constraints.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Boundary,
    Equivalence,
    Pairwise,
    Random,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Boundary => "boundary",
            Method::Equivalence => "equivalence",
            Method::Pairwise => "pairwise",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteScenario {
    pub scenario_id: String,
    pub source_ref: SourceRef,
    pub assignments: BTreeMap<String, f64>,
    pub method: Method,
    pub seed: Option<u64>,
    /// Parameters drawn from the default uniform distribution because the
    /// logical scenario declared none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub default_uniform: Vec<String>,
}

impl ConcreteScenario {
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

    pub fn source(&self) -> Result<SourceRef, FormatError> {
        Ok(SourceRef {
            id: self.scenario_id.clone(),
            hash: self.content_hash()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    Range,
    Missing,
    Unknown,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Parameter name, or constraint id for `CONSTRAINT`.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}: {}", self.kind, self.subject, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub pair_coverage: f64,
    pub boundary_coverage: f64,
    pub scenario_count: usize,
    pub infeasible_combination_count: usize,
    pub covered_pairs: usize,
    pub feasible_pairs: usize,
    pub boundary_covered_parameters: usize,
    pub parameter_count: usize,
}

/// Endpoints of the parameter's range; one value for a point range.
pub fn boundary_values(p: &Parameter) -> Vec<f64> {
    if p.range.is_point() {
        vec![p.range.lo]
    } else {
        vec![p.range.lo, p.range.hi]
    }
}

/// Midpoints of `k` equal-width classes over the range.
pub fn equivalence_classes(p: &Parameter, k: usize) -> Result<Vec<f64>, ConcretizeError> {
    if k == 0 {
        return Err(ConcretizeError::BadK);
    }
    let Parameter { range, .. } = p;
    if range.is_point() {
        return Ok(vec![range.lo]);
    }
    let width = range.hi - range.lo;
    Ok((0..k)
        .map(|i| {
            // lo + width·(2i+1)/(2k), clamped against rounding past hi
            let x = range.lo + width * (2 * i + 1) as f64 / (2 * k) as f64;
            x.clamp(range.lo, range.hi)
        })
        .collect())
}

pub type Levels = BTreeMap<String, Vec<f64>>;

/// Level grid in parameter declaration order, duplicates removed.
struct Grid {
    names: Vec<String>,
    levels: Vec<Vec<f64>>,
}

impl Grid {
    fn new(ls: &LogicalScenario, levels: &Levels) -> Result<Self, ConcretizeError> {
        for name in levels.keys() {
            if ls.parameter(name).is_none() {
                return Err(ConcretizeError::UnknownParameter {
                    parameter: name.clone(),
                });
            }
        }
        let mut grid = Grid {
            names: Vec::new(),
            levels: Vec::new(),
        };
        for p in &ls.parameters {
            let given = levels.get(&p.name).map(Vec::as_slice).unwrap_or_default();
            if given.is_empty() {
                return Err(ConcretizeError::EmptyLevels {
                    parameter: p.name.clone(),
                });
            }
            let mut own: Vec<f64> = Vec::new();
            for &value in given {
                if !p.range.contains(value) {
                    return Err(ConcretizeError::LevelOutOfRange {
                        parameter: p.name.clone(),
                        value,
                        range: p.range,
                    });
                }
                if !own.iter().any(|x| x.to_bits() == value.to_bits()) {
                    own.push(value);
                }
            }
            grid.names.push(p.name.clone());
            grid.levels.push(own);
        }
        Ok(grid)
    }

    fn width(&self) -> usize {
        self.names.len()
    }

    fn size(&self) -> u64 {
        self.levels
            .iter()
            .try_fold(1u64, |acc, l| acc.checked_mul(l.len() as u64))
            .unwrap_or(u64::MAX)
    }

    fn values(&self, row: &[usize]) -> BTreeMap<String, f64> {
        self.names
            .iter()
            .zip(row)
            .enumerate()
            .map(|(i, (name, &level))| (name.clone(), self.levels[i][level]))
            .collect()
    }

    /// Level index of `value` for parameter `i`, by exact equality.
    fn level_of(&self, i: usize, value: f64) -> Option<usize> {
        self.levels[i].iter().position(|x| *x == value)
    }

    fn pairs(&self) -> PairIndex {
        PairIndex::new(&self.levels)
    }
}

/// Dense numbering of `(i, a, j, b)`, `i < j`, level `a` of parameter `i`
/// with level `b` of parameter `j`.
struct PairIndex {
    base: Vec<Vec<usize>>,
    sizes: Vec<usize>,
    total: usize,
}

impl PairIndex {
    fn new(levels: &[Vec<f64>]) -> Self {
        let sizes: Vec<usize> = levels.iter().map(Vec::len).collect();
        let m = sizes.len();
        let mut base = vec![vec![0; m]; m];
        let mut total = 0;
        for i in 0..m {
            for j in i + 1..m {
                base[i][j] = total;
                total += sizes[i] * sizes[j];
            }
        }
        PairIndex { base, sizes, total }
    }

    fn id(&self, i: usize, a: usize, j: usize, b: usize) -> usize {
        self.base[i][j] + a * self.sizes[j] + b
    }

    fn decode(&self, id: usize) -> (usize, usize, usize, usize) {
        let m = self.sizes.len();
        for i in 0..m {
            for j in i + 1..m {
                let start = self.base[i][j];
                let len = self.sizes[i] * self.sizes[j];
                if id >= start && id < start + len {
                    let local = id - start;
                    return (i, local / self.sizes[j], j, local % self.sizes[j]);
                }
            }
        }
        unreachable!("pair id {id} out of range")
    }

    fn of_row<'r>(&'r self, row: &'r [usize]) -> impl Iterator<Item = usize> + 'r {
        (0..row.len()).flat_map(move |i| (i + 1..row.len()).map(move |j| self.id(i, row[i], j, row[j])))
    }
}

fn satisfies(ls: &LogicalScenario, values: &BTreeMap<String, f64>) -> bool {
    let lookup = |name: &str| values.get(name).copied();
    ls.constraints
        .iter()
        .all(|c| c.form.holds(&lookup) == Some(true))
}

/// The feasible pairs of a grid and rows that witness them.
struct PairSpace {
    index: PairIndex,
    feasible: Vec<bool>,
    /// Greedy covering rows, in selection order.
    cover: Vec<Vec<usize>>,
}

impl PairSpace {
    fn feasible_count(&self) -> usize {
        self.feasible.iter().filter(|f| **f).count()
    }
}

/// Build the pairwise cover of a grid with at least two parameters.
///
/// Grids up to [`GRID_LIMIT`] rows are enumerated: a pair is feasible iff
/// some feasible row contains it. Each step takes a row covering the most
/// uncovered pairs; ties go to the row whose pairs are scarcest among the
/// tied rows (sum of 1/offers), then to lexicographic order. Larger grids build one row
/// per still-open pair, fixing that pair and filling the rest greedily, then
/// randomly (fixed seed) for up to [`ATTEMPTS_PER_SAMPLE`] tries; a pair for
/// which no feasible row turns up is counted infeasible.
fn build_cover(ls: &LogicalScenario, grid: &Grid) -> Result<PairSpace, ConcretizeError> {
    let index = grid.pairs();
    let space = if grid.size() <= GRID_LIMIT {
        exhaustive_cover(ls, grid, index)
    } else {
        search_cover(ls, grid, index)
    };
    if space.cover.is_empty() {
        return Err(ConcretizeError::InfeasibleLevels {
            constraints: always_violated(ls, grid),
        });
    }
    Ok(space)
}

fn odometer(grid: &Grid) -> impl Iterator<Item = Vec<usize>> + '_ {
    let mut next = Some(vec![0usize; grid.width()]);
    std::iter::from_fn(move || {
        let row = next.take()?;
        let mut succ = row.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < grid.levels[i].len() {
                next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(row)
    })
}

fn exhaustive_cover(ls: &LogicalScenario, grid: &Grid, index: PairIndex) -> PairSpace {
    let rows: Vec<Vec<usize>> = odometer(grid)
        .filter(|row| satisfies(ls, &grid.values(row)))
        .collect();
    let mut feasible = vec![false; index.total];
    for row in &rows {
        for id in index.of_row(row) {
            feasible[id] = true;
        }
    }
    let mut uncovered = feasible.clone();
    let mut open = uncovered.iter().filter(|u| **u).count();
    let mut cover = Vec::new();
    if grid.width() == 1 {
        cover = rows;
    } else {
        while open > 0 {
            let gains: Vec<usize> = rows
                .iter()
                .map(|row| index.of_row(row).filter(|id| uncovered[*id]).count())
                .collect();
            let top = gains.iter().copied().max().unwrap_or(0);
            let candidates: Vec<usize> = (0..rows.len()).filter(|&r| gains[r] == top).collect();
            // among the top rows, prefer those whose open pairs few other
            // top rows offer
            let mut offered = vec![0u32; index.total];
            for &r in &candidates {
                for id in index.of_row(&rows[r]).filter(|id| uncovered[*id]) {
                    offered[id] += 1;
                }
            }
            let scarcity = |r: usize| -> f64 {
                index
                    .of_row(&rows[r])
                    .filter(|id| uncovered[*id])
                    .map(|id| 1.0 / f64::from(offered[id]))
                    .sum()
            };
            let mut best: Option<(usize, f64)> = None;
            for &r in &candidates {
                let score = scarcity(r);
                if best.is_none_or(|(_, s)| score > s) {
                    best = Some((r, score));
                }
            }
            let (gain, row) = (top, &rows[best.expect("an open feasible pair has a witness row").0]);
            for id in index.of_row(row) {
                uncovered[id] = false;
            }
            open -= gain;
            cover.push(row.clone());
        }
    }
    PairSpace {
        index,
        feasible,
        cover,
    }
}

fn search_cover(ls: &LogicalScenario, grid: &Grid, index: PairIndex) -> PairSpace {
    let m = grid.width();
    let mut covered = vec![false; index.total];
    let mut infeasible = vec![false; index.total];
    let mut cover = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for pair in 0..index.total {
        if covered[pair] || infeasible[pair] {
            continue;
        }
        let (i, a, j, b) = index.decode(pair);
        let mut found = None;
        for attempt in 0..ATTEMPTS_PER_SAMPLE {
            let mut row = vec![usize::MAX; m];
            row[i] = a;
            row[j] = b;
            for p in 0..m {
                if row[p] != usize::MAX {
                    continue;
                }
                row[p] = if attempt == 0 {
                    // most new pairs against the already-fixed columns
                    (0..grid.levels[p].len())
                        .max_by_key(|&level| {
                            let gain = (0..m)
                                .filter(|&q| q != p && row[q] != usize::MAX)
                                .filter(|&q| {
                                    let id = if q < p {
                                        index.id(q, row[q], p, level)
                                    } else {
                                        index.id(p, level, q, row[q])
                                    };
                                    !covered[id]
                                })
                                .count();
                            (gain, std::cmp::Reverse(level))
                        })
                        .unwrap_or(0)
                } else {
                    rng.gen_range(0..grid.levels[p].len())
                };
            }
            if satisfies(ls, &grid.values(&row)) {
                found = Some(row);
                break;
            }
        }
        match found {
            Some(row) => {
                for id in index.of_row(&row) {
                    covered[id] = true;
                }
                cover.push(row);
            }
            None => infeasible[pair] = true,
        }
    }
    PairSpace {
        index,
        feasible: covered,
        cover,
    }
}

/// Constraint ids violated by every row of the grid, for diagnostics.
fn always_violated(ls: &LogicalScenario, grid: &Grid) -> Vec<String> {
    if grid.size() > GRID_LIMIT {
        return Vec::new();
    }
    let mut candidates: BTreeSet<&str> = ls.constraints.iter().map(|c| c.id.as_str()).collect();
    for row in odometer(grid) {
        let values = grid.values(&row);
        let lookup = |name: &str| values.get(name).copied();
        candidates.retain(|id| {
            let c = ls.constraints.iter().find(|c| c.id == *id).expect("own id");
            c.form.holds(&lookup) != Some(true)
        });
        if candidates.is_empty() {
            break;
        }
    }
    candidates.into_iter().map(String::from).collect()
}

fn scenario_ids(ls: &LogicalScenario, method: Method) -> impl Iterator<Item = String> + '_ {
    (0..).map(move |i| format!("{}-{}-{}", ls.scenario_id, method, i))
}

fn covering_scenarios(
    ls: &LogicalScenario,
    levels: &Levels,
    method: Method,
) -> Result<Vec<ConcreteScenario>, ConcretizeError> {
    let grid = Grid::new(ls, levels)?;
    if grid.width() == 0 {
        return Ok(Vec::new());
    }
    let source = ls.source()?;
    let space = build_cover(ls, &grid)?;
    Ok(space
        .cover
        .iter()
        .zip(scenario_ids(ls, method))
        .map(|(row, scenario_id)| ConcreteScenario {
            scenario_id,
            source_ref: source.clone(),
            assignments: grid.values(row),
            method,
            seed: None,
            default_uniform: Vec::new(),
        })
        .collect())
}

/// Pairwise covering array over the given levels.
///
/// Every pair of levels that occurs in at least one constraint-satisfying
/// row is covered. A single parameter yields one row per feasible level; no
/// parameters yields no rows.
pub fn pairwise_cover(
    ls: &LogicalScenario,
    levels: &Levels,
) -> Result<Vec<ConcreteScenario>, ConcretizeError> {
    covering_scenarios(ls, levels, Method::Pairwise)
}

pub fn boundary_levels(ls: &LogicalScenario) -> Levels {
    ls.parameters
        .iter()
        .map(|p| (p.name.clone(), boundary_values(p)))
        .collect()
}

pub fn equivalence_levels(ls: &LogicalScenario, k: usize) -> Result<Levels, ConcretizeError> {
    ls.parameters
        .iter()
        .map(|p| Ok((p.name.clone(), equivalence_classes(p, k)?)))
        .collect()
}

/// Boundary values plus the `k` class midpoints, ascending.
pub fn pairwise_levels(ls: &LogicalScenario, k: usize) -> Result<Levels, ConcretizeError> {
    let mut levels = equivalence_levels(ls, k)?;
    for p in &ls.parameters {
        let own = levels.get_mut(&p.name).expect("one entry per parameter");
        own.extend(boundary_values(p));
        own.sort_by(f64::total_cmp);
        own.dedup_by(|a, b| a.to_bits() == b.to_bits());
    }
    Ok(levels)
}

/// Seed for scenario `index` of a request made with `master`: the
/// SplitMix64 output at position `index + 1` of the stream seeded by
/// `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn draw(p: &Parameter, rng: &mut ChaCha8Rng) -> Option<f64> {
    let range = p.range;
    if range.is_point() {
        return Some(range.lo);
    }
    match p.effective_distribution() {
        Distribution::Uniform => Some(rng.gen_range(range.lo..=range.hi)),
        Distribution::TruncatedGaussian { mean, stddev } => {
            let normal = Normal::new(mean, stddev).ok()?;
            (0..GAUSSIAN_TRIES)
                .map(|_| rng.sample(normal))
                .find(|x| range.contains(*x))
        }
    }
}

/// `n` constraint-satisfying scenarios drawn by rejection.
///
/// Scenario `i` is the first accepted draw from a ChaCha8 stream seeded
/// with `derive_seed(seed, i)`, which it records as its own seed. Attempts
/// are pooled: the request fails once `1000·n` draws have been spent.
pub fn sample_random(
    ls: &LogicalScenario,
    n: usize,
    seed: u64,
) -> Result<Vec<ConcreteScenario>, ConcretizeError> {
    let source = ls.source()?;
    let default_uniform: Vec<String> = ls
        .parameters
        .iter()
        .filter(|p| p.distribution.is_none() && !p.range.is_point())
        .map(|p| p.name.clone())
        .collect();
    let budget = ATTEMPTS_PER_SAMPLE.saturating_mul(n as u64);
    let mut attempts = 0u64;
    let mut out = Vec::with_capacity(n);
    for (index, scenario_id) in (0..n).zip(scenario_ids(ls, Method::Random)) {
        let own_seed = derive_seed(seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(own_seed);
        let assignments = loop {
            if attempts >= budget {
                return Err(ConcretizeError::SamplingExhausted {
                    requested: n,
                    accepted: out.len(),
                    attempts,
                });
            }
            attempts += 1;
            let candidate: Option<BTreeMap<String, f64>> = ls
                .parameters
                .iter()
                .map(|p| draw(p, &mut rng).map(|x| (p.name.clone(), x)))
                .collect();
            if let Some(values) = candidate.filter(|v| satisfies(ls, v)) {
                break values;
            }
        };
        out.push(ConcreteScenario {
            scenario_id,
            source_ref: source.clone(),
            assignments,
            method: Method::Random,
            seed: Some(own_seed),
            default_uniform: default_uniform.clone(),
        });
    }
    Ok(out)
}

fn check_source(ls: &LogicalScenario, cs: &ConcreteScenario) -> Result<(), ConcretizeError> {
    let expected = ls.source()?;
    if cs.source_ref != expected {
        return Err(ConcretizeError::SourceMismatch {
            expected: format!("{}@{}", expected.id, expected.hash),
            found: format!("{}@{}", cs.source_ref.id, cs.source_ref.hash),
        });
    }
    Ok(())
}

/// Every way `cs` fails to be a point of `ls`; empty iff it is one.
pub fn check_concrete(
    ls: &LogicalScenario,
    cs: &ConcreteScenario,
) -> Result<Vec<Violation>, ConcretizeError> {
    check_source(ls, cs)?;
    let mut out = Vec::new();
    for p in &ls.parameters {
        match cs.assignments.get(&p.name) {
            None => out.push(Violation {
                kind: ViolationKind::Missing,
                subject: p.name.clone(),
                message: "no value assigned".into(),
            }),
            Some(&x) if !p.range.contains(x) => out.push(Violation {
                kind: ViolationKind::Range,
                subject: p.name.clone(),
                message: format!("{x:?} outside {}", p.range),
            }),
            Some(_) => {}
        }
    }
    for name in cs.assignments.keys() {
        if ls.parameter(name).is_none() {
            out.push(Violation {
                kind: ViolationKind::Unknown,
                subject: name.clone(),
                message: "not a parameter of the logical scenario".into(),
            });
        }
    }
    let lookup = |name: &str| cs.assignments.get(name).copied();
    for c in &ls.constraints {
        match c.form.holds(&lookup) {
            Some(true) => {}
            Some(false) => out.push(Violation {
                kind: ViolationKind::Constraint,
                subject: c.id.clone(),
                message: format!("`{}` does not hold", c.form),
            }),
            None => out.push(Violation {
                kind: ViolationKind::Constraint,
                subject: c.id.clone(),
                message: format!("`{}` cannot be evaluated", c.form),
            }),
        }
    }
    Ok(out)
}

fn ratio(numerator: usize, denominator: usize) -> f64 {
    if denominator == 0 {
        1.0
    } else {
        numerator as f64 / denominator as f64
    }
}

/// Mechanical coverage of `set` against the pairs of `levels` and the range
/// endpoints of `ls`. Zero feasible pairs, or zero parameters, count as
/// fully covered.
pub fn coverage_metrics(
    ls: &LogicalScenario,
    levels: &Levels,
    set: &[ConcreteScenario],
) -> Result<CoverageReport, ConcretizeError> {
    for cs in set {
        check_source(ls, cs)?;
    }
    let grid = Grid::new(ls, levels)?;
    let (feasible, total, covered) = if grid.width() < 2 {
        (0, 0, 0)
    } else {
        let space = match build_cover(ls, &grid) {
            Ok(space) => space,
            Err(ConcretizeError::InfeasibleLevels { .. }) => PairSpace {
                feasible: vec![false; grid.pairs().total],
                index: grid.pairs(),
                cover: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        let mut hit = vec![false; space.index.total];
        for cs in set {
            // scenarios off the level grid still cover the pairs they hit
            let row: Vec<Option<usize>> = grid
                .names
                .iter()
                .enumerate()
                .map(|(i, name)| cs.assignments.get(name).and_then(|x| grid.level_of(i, *x)))
                .collect();
            for i in 0..row.len() {
                for j in i + 1..row.len() {
                    if let (Some(a), Some(b)) = (row[i], row[j]) {
                        hit[space.index.id(i, a, j, b)] = true;
                    }
                }
            }
        }
        let covered = hit
            .iter()
            .zip(&space.feasible)
            .filter(|(h, f)| **h && **f)
            .count();
        (space.feasible_count(), space.index.total, covered)
    };
    let boundary_covered = ls
        .parameters
        .iter()
        .filter(|p| {
            boundary_values(p)
                .iter()
                .all(|end| set.iter().any(|cs| cs.assignments.get(&p.name) == Some(end)))
        })
        .count();
    Ok(CoverageReport {
        pair_coverage: ratio(covered, feasible),
        boundary_coverage: ratio(boundary_covered, ls.parameters.len()),
        scenario_count: set.len(),
        infeasible_combination_count: total - feasible,
        covered_pairs: covered,
        feasible_pairs: feasible,
        boundary_covered_parameters: boundary_covered,
        parameter_count: ls.parameters.len(),
    })
}

/// How to pick concrete scenarios from a logical one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Pairwise cover over each parameter's range endpoints.
    Boundary,
    /// Pairwise cover over `k` class midpoints per parameter.
    Equivalence { k: usize },
    /// Pairwise cover over endpoints plus `k` class midpoints.
    Pairwise { k: usize },
    Random { n: usize, seed: u64 },
}

impl Strategy {
    pub fn method(&self) -> Method {
        match self {
            Strategy::Boundary => Method::Boundary,
            Strategy::Equivalence { .. } => Method::Equivalence,
            Strategy::Pairwise { .. } => Method::Pairwise,
            Strategy::Random { .. } => Method::Random,
        }
    }

    /// Levels the suite's pair coverage is measured against. Random suites
    /// are measured against range endpoints.
    pub fn levels(&self, ls: &LogicalScenario) -> Result<Levels, ConcretizeError> {
        match *self {
            Strategy::Boundary | Strategy::Random { .. } => Ok(boundary_levels(ls)),
            Strategy::Equivalence { k } => equivalence_levels(ls, k),
            Strategy::Pairwise { k } => pairwise_levels(ls, k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub source_ref: SourceRef,
    pub method: Method,
    pub seed: Option<u64>,
    pub levels: Levels,
    pub scenarios: Vec<ConcreteScenario>,
    pub coverage: CoverageReport,
}

impl Suite {
    pub fn to_canonical_json(&self) -> Result<String, FormatError> {
        let mut tree = serde_json::to_value(self).map_err(|e| FormatError::Encode(e.to_string()))?;
        tree["format"] = SUITE_FORMAT.into();
        for scenario in tree["scenarios"].as_array_mut().into_iter().flatten() {
            scenario["format"] = FORMAT.into();
        }
        canon::to_canonical_string(&tree)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let mut tree = canon::parse_json(text)?;
        canon::expect_format(&tree, SUITE_FORMAT)?;
        tree.as_object_mut().map(|o| o.remove("format"));
        for scenario in tree["scenarios"].as_array_mut().into_iter().flatten() {
            canon::expect_format(scenario, FORMAT)?;
            scenario.as_object_mut().map(|o| o.remove("format"));
        }
        canon::from_tree(tree)
    }
}

pub fn generate_suite(ls: &LogicalScenario, strategy: Strategy) -> Result<Suite, ConcretizeError> {
    let levels = strategy.levels(ls)?;
    let (scenarios, seed) = match strategy {
        Strategy::Random { n, seed } => (sample_random(ls, n, seed)?, Some(seed)),
        _ => (covering_scenarios(ls, &levels, strategy.method())?, None),
    };
    let coverage = coverage_metrics(ls, &levels, &scenarios)?;
    Ok(Suite {
        source_ref: ls.source()?,
        method: strategy.method(),
        seed,
        levels,
        scenarios,
        coverage,
    })
}
