//! T-matrices and sufficient identifiability checks.
//!
//! Every check here verifies a *sufficient* condition. A failing verdict
//! means the condition could not be verified for the given inputs; it is not
//! a proof that the model is unidentifiable.
//!
//! | check | `--theorem` | conditions |
//! |-------|-------------|------------|
//! | [`check_two_valued_binary`] | 1 | binary items taking two values, classes separated within each of three item subsets, positive weights |
//! | [`check_two_valued_categorical`] | 2 | two distinct response vectors per item, partial-CDF separation within each subset, positive weights |
//! | [`check_full_rank`] | 3 | three item subsets with full-column-rank T-matrices, positive weights |
//! | [`check_single_attribute_pools`] | 4 | per attribute, three disjoint pools of single-attribute items with full-rank reduced T-matrices |
//! | [`check_three_identities`] | - | Q contains three disjoint `K x K` identities |

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::numeric_rank;
use crate::models::{same_dist, AttributeSpace, QMatrix, ResponseProbTable};
use crate::simulate::MixtureWeights;

/// Default cap on T-matrix rows (response patterns).
pub const DEFAULT_T_ROW_CAP: u128 = 1 << 20;

/// Largest item count for which [`search_partition`] enumerates exhaustively.
pub const EXHAUSTIVE_SEARCH_MAX_ITEMS: usize = 9;

pub const SUFFICIENCY_NOTE: &str =
    "sufficient-condition check: FAIL means the condition was not verified, not that the model is unidentifiable";

/// How probabilities are compared when counting distinct values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ValueTolerance {
    /// Model-generated tables: compare after rounding to 12 decimals.
    Exact,
    /// Estimated tables: values within this absolute distance are equal.
    Absolute(f64),
}

impl ValueTolerance {
    /// Tolerance for estimated tables.
    pub const ESTIMATED: ValueTolerance = ValueTolerance::Absolute(1e-6);

    fn as_option(self) -> Option<f64> {
        match self {
            ValueTolerance::Exact => None,
            ValueTolerance::Absolute(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub tolerance: ValueTolerance,
    pub t_row_cap: u128,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tolerance: ValueTolerance::Exact,
            t_row_cap: DEFAULT_T_ROW_CAP,
        }
    }
}

/// Response-pattern-by-class probabilities for an item subset.
///
/// Rows enumerate patterns mixed-radix over `items` (in the given order,
/// last item fastest, category 0 first); columns follow the table's classes.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatrix {
    pub items: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

impl TMatrix {
    pub fn n_patterns(&self) -> usize {
        self.matrix.nrows()
    }

    /// Marginal pattern probabilities `T pi`.
    pub fn marginal(&self, weights: &MixtureWeights) -> Result<Vec<f64>> {
        if weights.len() != self.matrix.ncols() {
            return Err(Error::Domain(format!(
                "{} weights for {} classes",
                weights.len(),
                self.matrix.ncols()
            )));
        }
        let pi = nalgebra::DVector::from_column_slice(weights.as_slice());
        Ok((&self.matrix * pi).iter().copied().collect())
    }
}

pub fn build_t_matrix(table: &ResponseProbTable, items: &[usize], cap: u128) -> Result<TMatrix> {
    let mut seen = vec![false; table.n_items()];
    for &j in items {
        if j >= table.n_items() {
            return Err(Error::Domain(format!("item {j} out of range")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::Domain(format!("item {j} listed twice")));
        }
    }
    let kappa = items
        .iter()
        .try_fold(1u128, |acc, &j| {
            acc.checked_mul(table.categories()[j] as u128)
        })
        .unwrap_or(u128::MAX);
    if kappa > cap {
        return Err(Error::Size {
            what: format!("T-matrix pattern count for {} items", items.len()),
            size: kappa,
            cap,
        });
    }
    let m = table.n_classes();
    let mut rows = 1usize;
    let mut cur = vec![1.0; m];
    for &j in items {
        let k = table.categories()[j];
        let mut next = vec![0.0; rows * k * m];
        for r in 0..rows {
            for y in 0..k {
                let dst = (r * k + y) * m;
                for a in 0..m {
                    next[dst + a] = cur[r * m + a] * table.dist(j, a)[y];
                }
            }
        }
        rows *= k;
        cur = next;
    }
    Ok(TMatrix {
        items: items.to_vec(),
        matrix: DMatrix::from_row_slice(rows, m, &cur),
    })
}

/// Three disjoint, nonempty item subsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct ItemPartition {
    subsets: [Vec<usize>; 3],
}

impl ItemPartition {
    pub fn new(a: Vec<usize>, b: Vec<usize>, c: Vec<usize>) -> Result<Self> {
        let subsets = [a, b, c];
        let mut all: Vec<usize> = subsets.iter().flatten().copied().collect();
        if subsets.iter().any(Vec::is_empty) {
            return Err(Error::Domain("every item subset must be nonempty".into()));
        }
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("item subsets overlap".into()));
        }
        Ok(Self { subsets })
    }

    /// First two subsets as given; the third takes every remaining item.
    pub fn with_remainder(a: Vec<usize>, b: Vec<usize>, n_items: usize) -> Result<Self> {
        let c = (0..n_items)
            .filter(|j| !a.contains(j) && !b.contains(j))
            .collect();
        Self::new(a, b, c)
    }

    /// From an assignment vector `labels[j] in {0,1,2}`.
    pub fn from_assignment(labels: &[u8]) -> Result<Self> {
        let mut s: [Vec<usize>; 3] = Default::default();
        for (j, &l) in labels.iter().enumerate() {
            s.get_mut(l as usize)
                .ok_or_else(|| Error::Domain(format!("subset label {l} not in 0..3")))?
                .push(j);
        }
        let [a, b, c] = s;
        Self::new(a, b, c)
    }

    pub fn subsets(&self) -> &[Vec<usize>; 3] {
        &self.subsets
    }

    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        self.subsets.iter().flatten().copied()
    }

    fn check_range(&self, n_items: usize) -> Result<()> {
        match self.items().find(|&j| j >= n_items) {
            Some(j) => Err(Error::Domain(format!(
                "partition names item {j}, table has {n_items}"
            ))),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<Vec<usize>>> for ItemPartition {
    type Error = Error;

    fn try_from(v: Vec<Vec<usize>>) -> Result<Self> {
        let [a, b, c]: [Vec<usize>; 3] = v.try_into().map_err(|v: Vec<Vec<usize>>| {
            Error::Domain(format!("expected 3 item subsets, got {}", v.len()))
        })?;
        Self::new(a, b, c)
    }
}

impl From<ItemPartition> for Vec<Vec<usize>> {
    fn from(p: ItemPartition) -> Self {
        p.subsets.into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    TwoValuedBinary,
    TwoValuedCategorical,
    FullRank,
    SingleAttributePools,
    ThreeIdentities,
}

impl Check {
    pub fn label(self) -> &'static str {
        match self {
            Check::TwoValuedBinary => "two-valued binary items (theorem 1)",
            Check::TwoValuedCategorical => "two-valued categorical items (theorem 2)",
            Check::FullRank => "full-rank T-matrices (theorem 3)",
            Check::SingleAttributePools => "single-attribute item pools (theorem 4)",
            Check::ThreeIdentities => "three identity submatrices in Q",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Pools certified for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePools {
    pub attribute: usize,
    pub levels: usize,
    pub pools: Vec<Vec<usize>>,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub partition: Option<ItemPartition>,
    pub ranks: Vec<usize>,
    pub pools: Vec<AttributePools>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: Check,
    pub pass: bool,
    pub conditions: Vec<Condition>,
    pub certificate: Certificate,
    pub diagnostics: Vec<String>,
    /// A pair of classes the conditions failed to separate, when one exists.
    pub counterexample: Option<(usize, usize)>,
    pub note: String,
}

impl Verdict {
    fn new(check: Check, conditions: Vec<Condition>, certificate: Certificate) -> Self {
        let pass = conditions.iter().all(|c| c.passed);
        let diagnostics = conditions
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        Self {
            check,
            pass,
            conditions,
            certificate,
            diagnostics,
            counterexample: None,
            note: SUFFICIENCY_NOTE.into(),
        }
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "check: {}", self.check.label())?;
        writeln!(f, "result: {}", if self.pass { "PASS" } else { "FAIL" })?;
        for c in &self.conditions {
            writeln!(
                f,
                "  [{}] {}: {}",
                if c.passed { "ok" } else { "--" },
                c.name,
                c.detail
            )?;
        }
        if let Some(p) = &self.certificate.partition {
            let show: Vec<String> = p
                .subsets()
                .iter()
                .map(|s| {
                    format!(
                        "{{{}}}",
                        s.iter()
                            .map(|j| (j + 1).to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect();
            writeln!(f, "  partition (1-based items): {}", show.join(" / "))?;
        }
        if !self.certificate.ranks.is_empty() {
            writeln!(f, "  subset ranks: {:?}", self.certificate.ranks)?;
        }
        for pool in &self.certificate.pools {
            let show: Vec<String> = pool
                .pools
                .iter()
                .map(|s| {
                    format!(
                        "{{{}}}",
                        s.iter()
                            .map(|j| (j + 1).to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect();
            write!(
                f,
                "  attribute {} pools: {}",
                pool.attribute + 1,
                show.join(" ")
            )?;
            if pool.ranks.is_empty() {
                writeln!(f)?;
            } else {
                writeln!(f, " ranks {:?}", pool.ranks)?;
            }
        }
        if let Some((a, b)) = self.counterexample {
            writeln!(f, "  unseparated classes: {} and {}", a + 1, b + 1)?;
        }
        write!(f, "note: {}", self.note)
    }
}

fn check_weights(table: &ResponseProbTable, weights: &MixtureWeights) -> Result<Condition> {
    if weights.len() != table.n_classes() {
        return Err(Error::Domain(format!(
            "{} weights for {} classes",
            weights.len(),
            table.n_classes()
        )));
    }
    let zero: Vec<String> = (0..weights.len())
        .filter(|&a| weights.as_slice()[a] <= 0.0)
        .map(|a| (a + 1).to_string())
        .collect();
    Ok(Condition {
        name: "positive_weights".into(),
        passed: zero.is_empty(),
        detail: if zero.is_empty() {
            "all class weights positive".into()
        } else {
            format!("zero weight on classes {}", zero.join(","))
        },
    })
}

/// Distinct response vectors of `item` across classes.
fn distinct_vectors(table: &ResponseProbTable, item: usize, tol: ValueTolerance) -> usize {
    let mut reps: Vec<usize> = Vec::new();
    for a in 0..table.n_classes() {
        if !reps
            .iter()
            .any(|&r| same_dist(table.dist(item, r), table.dist(item, a), tol.as_option()))
        {
            reps.push(a);
        }
    }
    reps.len()
}

fn two_valued_condition(
    table: &ResponseProbTable,
    partition: &ItemPartition,
    tol: ValueTolerance,
) -> Condition {
    let bad: Vec<String> = partition
        .items()
        .filter_map(|j| {
            let n = distinct_vectors(table, j, tol);
            (n > 2).then(|| format!("item {} has {n}", j + 1))
        })
        .collect();
    Condition {
        name: "two_valued_items".into(),
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            "every partitioned item takes at most two response distributions".into()
        } else {
            format!("more than two distinct distributions: {}", bad.join("; "))
        },
    }
}

/// First class pair not separated by `separates` within some subset.
fn separation_condition(
    name: &str,
    table: &ResponseProbTable,
    partition: &ItemPartition,
    separates: impl Fn(usize, usize, usize) -> bool,
) -> (Condition, Option<(usize, usize)>) {
    let m = table.n_classes();
    for (s, subset) in partition.subsets().iter().enumerate() {
        for a in 0..m {
            for b in a + 1..m {
                if !subset.iter().any(|&j| separates(j, a, b)) {
                    return (
                        Condition {
                            name: name.into(),
                            passed: false,
                            detail: format!(
                                "subset {} does not separate classes {} and {}",
                                s + 1,
                                a + 1,
                                b + 1
                            ),
                        },
                        Some((a, b)),
                    );
                }
            }
        }
    }
    (
        Condition {
            name: name.into(),
            passed: true,
            detail: "each subset separates every class pair".into(),
        },
        None,
    )
}

fn require_partition(partition: Option<&ItemPartition>) -> Result<&ItemPartition> {
    partition
        .ok_or_else(|| Error::Precondition("an item partition is required for this check".into()))
}

/// Binary items, each taking at most two values; every class pair separated
/// within each subset; positive weights.
///
/// Class separation is checked item by item: two product distributions over
/// a subset coincide iff every item marginal coincides, which is the same as
/// the two T-matrix columns being equal.
pub fn check_two_valued_binary(
    table: &ResponseProbTable,
    weights: &MixtureWeights,
    partition: Option<&ItemPartition>,
    opts: &CheckOptions,
) -> Result<Verdict> {
    if !table.is_binary() {
        return Err(Error::Unsupported(
            "this check needs binary responses".into(),
        ));
    }
    let partition = require_partition(partition)?;
    partition.check_range(table.n_items())?;
    let tol = opts.tolerance.as_option();
    let (sep, counter) = separation_condition(
        "distinct_class_distributions",
        table,
        partition,
        |j, a, b| !same_dist(table.dist(j, a), table.dist(j, b), tol),
    );
    let conditions = vec![
        sep,
        two_valued_condition(table, partition, opts.tolerance),
        check_weights(table, weights)?,
    ];
    let mut v = Verdict::new(
        Check::TwoValuedBinary,
        conditions,
        Certificate {
            partition: Some(partition.clone()),
            ..Default::default()
        },
    );
    v.counterexample = counter;
    Ok(v)
}

/// Multi-category version: at most two distinct vectors per item, and some
/// item in each subset has differing partial sums `p^1 + ... + p^k` for some
/// `k < k_j`.
pub fn check_two_valued_categorical(
    table: &ResponseProbTable,
    weights: &MixtureWeights,
    partition: Option<&ItemPartition>,
    opts: &CheckOptions,
) -> Result<Verdict> {
    let partition = require_partition(partition)?;
    partition.check_range(table.n_items())?;
    let tol = opts.tolerance.as_option();
    let (sep, counter) = separation_condition("cdf_separation", table, partition, |j, a, b| {
        let (pa, pb) = (table.dist(j, a), table.dist(j, b));
        let k = pa.len();
        let (mut ca, mut cb) = (0.0, 0.0);
        (0..k - 1).any(|y| {
            ca += pa[y];
            cb += pb[y];
            !same_dist(&[ca], &[cb], tol)
        })
    });
    let conditions = vec![
        two_valued_condition(table, partition, opts.tolerance),
        sep,
        check_weights(table, weights)?,
    ];
    let mut v = Verdict::new(
        Check::TwoValuedCategorical,
        conditions,
        Certificate {
            partition: Some(partition.clone()),
            ..Default::default()
        },
    );
    v.counterexample = counter;
    Ok(v)
}

/// Ranks of the three subset T-matrices.
fn subset_ranks(
    table: &ResponseProbTable,
    partition: &ItemPartition,
    cap: u128,
) -> Result<Vec<usize>> {
    partition
        .subsets()
        .iter()
        .map(|s| {
            let t = build_t_matrix(table, s, cap).map_err(|e| match e {
                Error::Size { what, size, cap } => Error::Size {
                    what: format!("{what} (use the single-attribute pool check, --theorem 4)"),
                    size,
                    cap,
                },
                other => other,
            })?;
            numeric_rank(&t.matrix)
        })
        .collect()
}

/// Three subsets whose T-matrices all have full column rank `M`, plus
/// positive weights.
pub fn check_full_rank(
    table: &ResponseProbTable,
    weights: &MixtureWeights,
    partition: Option<&ItemPartition>,
    opts: &CheckOptions,
) -> Result<Verdict> {
    let partition = require_partition(partition)?;
    partition.check_range(table.n_items())?;
    let ranks = subset_ranks(table, partition, opts.t_row_cap)?;
    let m = table.n_classes();
    let short: Vec<String> = ranks
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < m)
        .map(|(s, r)| format!("subset {} rank {r}", s + 1))
        .collect();
    let conditions = vec![
        Condition {
            name: "full_column_rank".into(),
            passed: short.is_empty(),
            detail: if short.is_empty() {
                format!("all three T-matrices have rank {m}")
            } else {
                format!("need rank {m}: {}", short.join(", "))
            },
        },
        check_weights(table, weights)?,
    ];
    Ok(Verdict::new(
        Check::FullRank,
        conditions,
        Certificate {
            partition: Some(partition.clone()),
            ranks,
            pools: Vec::new(),
        },
    ))
}

/// Response distribution of a single-attribute item at each level of
/// `attribute`, averaged over classes sharing that level.
fn reduced_columns(
    table: &ResponseProbTable,
    space: &AttributeSpace,
    item: usize,
    attribute: usize,
) -> Vec<Vec<f64>> {
    let d = space.levels()[attribute];
    let k = table.categories()[item];
    let mut sums = vec![vec![0.0; k]; d];
    let mut counts = vec![0usize; d];
    for (a, profile) in space.profiles().enumerate() {
        let v = profile[attribute];
        counts[v] += 1;
        for (s, p) in sums[v].iter_mut().zip(table.dist(item, a)) {
            *s += p;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| s.into_iter().map(|x| x / c as f64).collect())
        .collect()
}

/// Khatri-Rao product of reduced columns over `pool`, as a patterns x levels matrix.
fn reduced_t(cols_per_item: &[&Vec<Vec<f64>>], levels: usize) -> DMatrix<f64> {
    let mut cur: Vec<Vec<f64>> = vec![vec![1.0]; levels];
    for cols in cols_per_item {
        cur = cur
            .iter()
            .zip(cols.iter())
            .map(|(acc, col)| {
                acc.iter()
                    .flat_map(|&x| col.iter().map(move |&p| x * p))
                    .collect()
            })
            .collect();
    }
    let rows = cur[0].len();
    DMatrix::from_fn(rows, levels, |r, c| cur[c][r])
}

/// For each attribute, greedily (in item order) fills three disjoint pools of
/// items whose Q-row is that attribute's unit vector, adding an item to the
/// current pool only when it raises the pool's reduced-T rank, until the pool
/// reaches rank `d_k`.
pub fn check_single_attribute_pools(
    table: &ResponseProbTable,
    weights: &MixtureWeights,
    q: &QMatrix,
    space: &AttributeSpace,
    opts: &CheckOptions,
) -> Result<Verdict> {
    if table.n_classes() != space.n_classes() {
        return Err(Error::Domain(format!(
            "table has {} classes, attribute space has {}",
            table.n_classes(),
            space.n_classes()
        )));
    }
    if q.n_items() != table.n_items() || q.n_attributes() != space.n_attributes() {
        return Err(Error::Domain(
            "Q-matrix does not match the table/space".into(),
        ));
    }
    let mut conditions = Vec::new();
    let mut certificate = Certificate::default();
    for k in 0..space.n_attributes() {
        let d = space.levels()[k];
        let candidates: Vec<usize> = (0..q.n_items()).filter(|&j| q.is_unit_row(j, k)).collect();
        let columns: Vec<Vec<Vec<f64>>> = candidates
            .iter()
            .map(|&j| reduced_columns(table, space, j, k))
            .collect();
        let mut pools: Vec<Vec<usize>> = Vec::new();
        let mut ranks = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        let mut current_rank = 0usize;
        for ci in 0..candidates.len() {
            if pools.len() == 3 {
                break;
            }
            let mut trial: Vec<usize> = current.clone();
            trial.push(ci);
            let kappa: u128 = trial
                .iter()
                .map(|&c| table.categories()[candidates[c]] as u128)
                .product();
            if kappa > opts.t_row_cap {
                continue;
            }
            let cols: Vec<&Vec<Vec<f64>>> = trial.iter().map(|&c| &columns[c]).collect();
            let rank = numeric_rank(&reduced_t(&cols, d))?;
            if rank > current_rank {
                current = trial;
                current_rank = rank;
            }
            if current_rank == d {
                pools.push(current.iter().map(|&c| candidates[c]).collect());
                ranks.push(current_rank);
                current.clear();
                current_rank = 0;
            }
        }
        let passed = pools.len() == 3;
        conditions.push(Condition {
            name: format!("attribute_{}_pools", k + 1),
            passed,
            detail: if passed {
                format!("three pools of rank {d}")
            } else {
                format!(
                    "attribute {}: only {} of 3 rank-{d} pools from {} single-attribute items",
                    k + 1,
                    pools.len(),
                    candidates.len()
                )
            },
        });
        certificate.pools.push(AttributePools {
            attribute: k,
            levels: d,
            pools,
            ranks,
        });
    }
    conditions.push(check_weights(table, weights)?);
    Ok(Verdict::new(
        Check::SingleAttributePools,
        conditions,
        certificate,
    ))
}

/// Every attribute has at least three unit rows in Q, so Q can be rearranged
/// to contain three disjoint identity blocks.
pub fn check_three_identities(q: &QMatrix) -> Verdict {
    let mut conditions = Vec::new();
    let mut pools = Vec::new();
    for k in 0..q.n_attributes() {
        let units: Vec<usize> = (0..q.n_items()).filter(|&j| q.is_unit_row(j, k)).collect();
        let passed = units.len() >= 3;
        conditions.push(Condition {
            name: format!("attribute_{}_unit_rows", k + 1),
            passed,
            detail: if passed {
                format!("{} unit rows", units.len())
            } else {
                format!(
                    "attribute {} has only {} unit rows, need 3",
                    k + 1,
                    units.len()
                )
            },
        });
        pools.push(AttributePools {
            attribute: k,
            levels: 2,
            pools: units.iter().take(3).map(|&j| vec![j]).collect(),
            ranks: Vec::new(),
        });
    }
    Verdict::new(
        Check::ThreeIdentities,
        conditions,
        Certificate {
            pools,
            ..Default::default()
        },
    )
}

fn rank_score(
    table: &ResponseProbTable,
    labels: &[u8],
    cap: u128,
) -> Option<(ItemPartition, Vec<usize>)> {
    let p = ItemPartition::from_assignment(labels).ok()?;
    let ranks = p
        .subsets()
        .iter()
        .map(|s| {
            build_t_matrix(table, s, cap)
                .ok()
                .and_then(|t| numeric_rank(&t.matrix).ok())
                .unwrap_or(0)
        })
        .collect();
    Some((p, ranks))
}

fn score(ranks: &[usize], m: usize) -> (usize, usize) {
    (
        ranks.iter().map(|&r| r.min(m)).min().unwrap_or(0),
        ranks.iter().map(|&r| r.min(m)).sum(),
    )
}

/// Looks for an item partition passing [`check_full_rank`].
///
/// Up to [`EXHAUSTIVE_SEARCH_MAX_ITEMS`] items every assignment is tried and
/// the lexicographically smallest passing assignment wins. Larger designs
/// start from a round-robin assignment and apply single-item moves while the
/// (minimum rank, total rank) score improves. Returns the passing partition,
/// or the best one found with a failing verdict.
pub fn search_partition(
    table: &ResponseProbTable,
    weights: &MixtureWeights,
    opts: &CheckOptions,
) -> Result<(Option<ItemPartition>, Verdict)> {
    let j = table.n_items();
    let m = table.n_classes();
    if j < 3 {
        let mut v = Verdict::new(
            Check::FullRank,
            vec![
                Condition {
                    name: "full_column_rank".into(),
                    passed: false,
                    detail: format!("{j} items cannot form three nonempty subsets"),
                },
                check_weights(table, weights)?,
            ],
            Certificate::default(),
        );
        v.diagnostics.push("no partition searched".into());
        return Ok((None, v));
    }
    let cap = opts.t_row_cap;
    let best = if j <= EXHAUSTIVE_SEARCH_MAX_ITEMS {
        let total = 3usize.pow(j as u32);
        let decode = |mut code: usize| {
            let mut labels = vec![0u8; j];
            for slot in labels.iter_mut().rev() {
                *slot = (code % 3) as u8;
                code /= 3;
            }
            labels
        };
        let passing = (0..total).into_par_iter().find_first(|&code| {
            rank_score(table, &decode(code), cap).is_some_and(|(_, r)| r.iter().all(|&x| x >= m))
        });
        match passing {
            Some(code) => rank_score(table, &decode(code), cap),
            None => (0..total)
                .into_par_iter()
                .filter_map(|code| rank_score(table, &decode(code), cap).map(|(p, r)| (code, p, r)))
                .max_by(|a, b| score(&a.2, m).cmp(&score(&b.2, m)).then(b.0.cmp(&a.0)))
                .map(|(_, p, r)| (p, r)),
        }
    } else {
        let mut labels: Vec<u8> = (0..j).map(|i| (i % 3) as u8).collect();
        let mut cur =
            rank_score(table, &labels, cap).expect("round-robin has three nonempty subsets");
        'improve: while score(&cur.1, m).0 < m {
            for item in 0..j {
                for target in 0..3u8 {
                    if target == labels[item] {
                        continue;
                    }
                    let mut trial = labels.clone();
                    trial[item] = target;
                    if let Some(cand) = rank_score(table, &trial, cap) {
                        if score(&cand.1, m) > score(&cur.1, m) {
                            labels = trial;
                            cur = cand;
                            continue 'improve;
                        }
                    }
                }
            }
            break;
        }
        Some(cur)
    };
    let (partition, _) = best.expect("at least one assignment has three nonempty subsets");
    let verdict = check_full_rank(table, weights, Some(&partition), opts)?;
    Ok((Some(partition), verdict))
}
