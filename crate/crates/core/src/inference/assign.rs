//! Minimum-cost assignment and label alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ResponseProbTable;

/// Minimum-cost assignment of every row to a distinct column
/// (`rows <= cols`), by the Kuhn-Munkres algorithm with potentials.
/// Returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= columns");
    // 1-based arrays; column 0 is a virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// Minimum-cost matching of rows to columns of any shape; each side is
/// matched at most once. Returns the column for each row, if matched.
pub fn hungarian_rect(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n <= m {
        return hungarian(cost).into_iter().map(Some).collect();
    }
    let t: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| cost[i][j]).collect())
        .collect();
    let mut out = vec![None; n];
    for (j, i) in hungarian(&t).into_iter().enumerate() {
        out[i] = Some(j);
    }
    out
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Summed total-variation distance between class `a` of `x` and class `b` of `y`.
pub fn class_distance(x: &ResponseProbTable, a: usize, y: &ResponseProbTable, b: usize) -> f64 {
    (0..x.n_items())
        .map(|j| total_variation(x.dist(j, a), y.dist(j, b)))
        .sum()
}

/// Map from estimated classes to true classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAlignment {
    /// `map[a]` is the true class matched to estimated class `a`; `None`
    /// only when there are more estimated than true classes.
    pub map: Vec<Option<usize>>,
    /// Sum over matched pairs of the summed per-item TV distance.
    pub cost: f64,
}

impl LabelAlignment {
    /// Estimated class matched to true class `t`.
    pub fn inverse(&self, t: usize) -> Option<usize> {
        self.map.iter().position(|&m| m == Some(t))
    }

    pub fn is_complete(&self) -> bool {
        self.map.iter().all(Option::is_some)
    }
}

/// Optimal alignment of estimated classes to true classes under summed TV cost.
pub fn align_labels(est: &ResponseProbTable, truth: &ResponseProbTable) -> Result<LabelAlignment> {
    if est.categories() != truth.categories() {
        return Err(Error::Domain(
            "estimate and truth have different item layouts".into(),
        ));
    }
    let cost: Vec<Vec<f64>> = (0..est.n_classes())
        .map(|a| {
            (0..truth.n_classes())
                .map(|b| class_distance(est, a, truth, b))
                .collect()
        })
        .collect();
    let map = hungarian_rect(&cost);
    let total = map
        .iter()
        .enumerate()
        .filter_map(|(a, m)| m.map(|b| cost[a][b]))
        .sum();
    Ok(LabelAlignment { map, cost: total })
}
