use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum_y p = 1` for every (item, class) distribution.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Per-item, per-class categorical response distributions `p_{j,a}^y`.
///
/// Category index 0 is the lowest response; for binary items index 1 is the
/// positive response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct ResponseProbTable {
    categories: Vec<usize>,
    n_classes: usize,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

/// Serialized form: `probs[j][a]` is the distribution of item `j` in class `a`.
#[derive(Serialize, Deserialize)]
struct TableRepr {
    probs: Vec<Vec<Vec<f64>>>,
}

impl ResponseProbTable {
    /// Builds from `probs[item][class]` distributions.
    pub fn new(probs: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n_items = probs.len();
        if n_items == 0 {
            return Err(Error::Domain("table needs at least one item".into()));
        }
        let n_classes = probs[0].len();
        if n_classes == 0 {
            return Err(Error::Domain("table needs at least one class".into()));
        }
        let mut categories = Vec::with_capacity(n_items);
        let mut offsets = Vec::with_capacity(n_items);
        let mut data = Vec::new();
        for (j, item) in probs.into_iter().enumerate() {
            if item.len() != n_classes {
                return Err(Error::Domain(format!(
                    "item {} has {} classes, expected {n_classes}",
                    j + 1,
                    item.len()
                )));
            }
            let k = item[0].len();
            if k < 2 {
                return Err(Error::Domain(format!(
                    "item {} has fewer than 2 categories",
                    j + 1
                )));
            }
            categories.push(k);
            offsets.push(data.len());
            for (a, dist) in item.into_iter().enumerate() {
                if dist.len() != k {
                    return Err(Error::Domain(format!(
                        "item {} class {} has {} categories, expected {k}",
                        j + 1,
                        a + 1,
                        dist.len()
                    )));
                }
                check_distribution(&dist, j, a)?;
                data.extend_from_slice(&dist);
            }
        }
        Ok(Self {
            categories,
            n_classes,
            offsets,
            data,
        })
    }

    /// Binary table from positive-response probabilities `positive[item][class]`.
    pub fn from_binary(positive: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            positive
                .iter()
                .map(|row| row.iter().map(|&p| vec![1.0 - p, p]).collect())
                .collect(),
        )
    }

    pub fn n_items(&self) -> usize {
        self.categories.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn is_binary(&self) -> bool {
        self.categories.iter().all(|&k| k == 2)
    }

    pub fn dist(&self, item: usize, class: usize) -> &[f64] {
        let k = self.categories[item];
        let start = self.offsets[item] + class * k;
        &self.data[start..start + k]
    }

    /// Positive-response probability of a binary item.
    pub fn positive(&self, item: usize, class: usize) -> f64 {
        debug_assert_eq!(self.categories[item], 2);
        self.dist(item, class)[1]
    }

    /// Nested `probs[item][class]` copy.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.n_items())
            .map(|j| {
                (0..self.n_classes)
                    .map(|a| self.dist(j, a).to_vec())
                    .collect()
            })
            .collect()
    }

    /// Table over a subset of classes, in the given order.
    pub fn restrict_classes(&self, classes: &[usize]) -> Result<Self> {
        if let Some(&bad) = classes.iter().find(|&&c| c >= self.n_classes) {
            return Err(Error::Domain(format!("class index {bad} out of range")));
        }
        Self::new(
            (0..self.n_items())
                .map(|j| classes.iter().map(|&a| self.dist(j, a).to_vec()).collect())
                .collect(),
        )
    }

    /// Table over a subset of items, in the given order.
    pub fn restrict_items(&self, items: &[usize]) -> Result<Self> {
        if let Some(&bad) = items.iter().find(|&&j| j >= self.n_items()) {
            return Err(Error::Domain(format!("item index {bad} out of range")));
        }
        Self::new(
            items
                .iter()
                .map(|&j| {
                    (0..self.n_classes)
                        .map(|a| self.dist(j, a).to_vec())
                        .collect()
                })
                .collect(),
        )
    }
}

fn check_distribution(dist: &[f64], item: usize, class: usize) -> Result<()> {
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(Error::Domain(format!(
            "item {} class {}: probabilities {dist:?} not in [0,1]",
            item + 1,
            class + 1
        )));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Domain(format!(
            "item {} class {}: probabilities sum to {total}",
            item + 1,
            class + 1
        )));
    }
    Ok(())
}

impl TryFrom<TableRepr> for ResponseProbTable {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        Self::new(r.probs)
    }
}

impl From<ResponseProbTable> for TableRepr {
    fn from(t: ResponseProbTable) -> Self {
        TableRepr {
            probs: t.to_nested(),
        }
    }
}

/// Rounds to 12 decimals; used wherever model-generated probabilities are
/// compared for equality.
pub fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

pub(crate) fn same_dist(a: &[f64], b: &[f64], tol: Option<f64>) -> bool {
    match tol {
        None => a.iter().zip(b).all(|(x, y)| round12(*x) == round12(*y)),
        Some(t) => a.iter().zip(b).all(|(x, y)| (x - y).abs() <= t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_normalization() {
        assert!(ResponseProbTable::new(vec![vec![vec![0.4, 0.5]]]).is_err());
        assert!(ResponseProbTable::new(vec![vec![vec![-0.1, 1.1]]]).is_err());
        let t =
            ResponseProbTable::new(vec![vec![vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0]]]).unwrap();
        assert_eq!(t.categories(), &[3]);
        assert_eq!(t.dist(0, 1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn restrict_preserves_order() {
        let t =
            ResponseProbTable::from_binary(&[vec![0.1, 0.2, 0.3], vec![0.9, 0.8, 0.7]]).unwrap();
        let r = t.restrict_classes(&[2, 0]).unwrap();
        assert_eq!(r.positive(0, 0), 0.3);
        assert_eq!(r.positive(1, 1), 0.9);
        let i = t.restrict_items(&[1]).unwrap();
        assert_eq!(i.n_items(), 1);
        assert_eq!(i.positive(0, 2), 0.7);
    }

    #[test]
    fn json_round_trip() {
        let t = ResponseProbTable::from_binary(&[vec![0.25, 0.75]]).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: ResponseProbTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
