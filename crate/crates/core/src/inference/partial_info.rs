//! Per-item partial-information partitions estimated from a response table.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assign::LabelAlignment;
use crate::cluster::{kmeans, silhouette, sq_dist};
use crate::error::{Error, Result};
use crate::models::{Partition, ResponseProbTable};
use crate::simulate::stream_rng;

/// Split threshold used for exact tables (no sample size).
const EXACT_SPLIT: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    /// Largest k tried by silhouette selection.
    pub max_k: usize,
    /// Below this maximum pairwise Euclidean distance an item is one block.
    pub flat_eps: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            max_k: 8,
            flat_eps: 0.02,
            restarts: 20,
            seed: 0,
        }
    }
}

/// `d_j` between classes: summed squared difference of distributions.
pub fn item_distance(table: &ResponseProbTable, item: usize, a: usize, b: usize) -> f64 {
    sq_dist(table.dist(item, a), table.dist(item, b))
}

/// Merge threshold `n^{-1/2}`, or an exact-equality threshold without `n`.
pub fn merge_threshold(n: Option<usize>) -> f64 {
    n.map_or(EXACT_SPLIT, |n| 1.0 / (n.max(1) as f64).sqrt())
}

/// Connected components of `members` under the link `d_j <= threshold`.
fn components(
    table: &ResponseProbTable,
    item: usize,
    members: &[usize],
    threshold: f64,
) -> Vec<Vec<usize>> {
    let mut label: Vec<Option<usize>> = vec![None; members.len()];
    let mut out = Vec::new();
    for start in 0..members.len() {
        if label[start].is_some() {
            continue;
        }
        let id = out.len();
        label[start] = Some(id);
        let mut stack = vec![start];
        let mut block = Vec::new();
        while let Some(x) = stack.pop() {
            block.push(members[x]);
            for y in 0..members.len() {
                if label[y].is_none()
                    && item_distance(table, item, members[x], members[y]) <= threshold
                {
                    label[y] = Some(id);
                    stack.push(y);
                }
            }
        }
        out.push(block);
    }
    out
}

/// Threshold-merge estimate: classes linked when `d_j <= n^{-1/2}`, closed
/// transitively.
pub fn merge_partial_info_threshold(
    table: &ResponseProbTable,
    item: usize,
    n: Option<usize>,
) -> Partition {
    let all: Vec<usize> = (0..table.n_classes()).collect();
    Partition::from_blocks(components(table, item, &all, merge_threshold(n)))
}

/// K-means/silhouette estimate of the partition for `item`.
///
/// Classes' distributions are clustered for `k = 2..=min(M, max_k)` and the
/// first k with the largest mean silhouette is kept. Each cluster is then
/// split into the connected components of `d_j <= n^{-1/2}` (exact equality
/// when `n` is `None`), so separated singleton classes are not absorbed by a
/// neighbouring cluster. Items whose distributions all lie within `flat_eps`
/// of each other form a single block.
pub fn cluster_partial_info(
    table: &ResponseProbTable,
    item: usize,
    n: Option<usize>,
    opts: &ClusterOptions,
) -> Partition {
    let m = table.n_classes();
    if m < 2 {
        return Partition::single_block(m);
    }
    let points: Vec<Vec<f64>> = (0..m).map(|a| table.dist(item, a).to_vec()).collect();
    let spread = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .map(|(a, b)| sq_dist(&points[a], &points[b]).sqrt())
        .fold(0.0, f64::max);
    if spread < opts.flat_eps {
        return Partition::single_block(m);
    }
    let mut rng = stream_rng(opts.seed, item as u64);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for k in 2..=m.min(opts.max_k.max(2)) {
        let km = kmeans(&points, k, opts.restarts, &mut rng);
        let s = silhouette(&points, &km.labels);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, km.labels));
        }
    }
    let labels = best.expect("k range is nonempty").1;
    let threshold = merge_threshold(n);
    let clusters = Partition::from_labels(&labels);
    let blocks = clusters
        .blocks()
        .iter()
        .flat_map(|b| components(table, item, b, threshold))
        .collect();
    Partition::from_blocks(blocks)
}

/// [`cluster_partial_info`] for every item, in parallel.
pub fn cluster_all(
    table: &ResponseProbTable,
    n: Option<usize>,
    opts: &ClusterOptions,
) -> Vec<Partition> {
    (0..table.n_items())
        .into_par_iter()
        .map(|j| cluster_partial_info(table, j, n, opts))
        .collect()
}

/// Fraction of items whose estimated partition, mapped through `alignment`,
/// equals the true partition restricted to the matched true classes.
/// Unmatched estimated classes are left out of the comparison.
pub fn partial_info_accuracy(
    estimated: &[Partition],
    truth: &[Partition],
    alignment: &LabelAlignment,
) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(Error::Domain(format!(
            "{} estimated partitions for {} items",
            estimated.len(),
            truth.len()
        )));
    }
    if estimated.is_empty() {
        return Ok(1.0);
    }
    let image: BTreeSet<usize> = alignment.map.iter().flatten().copied().collect();
    let matched: BTreeSet<usize> = (0..alignment.map.len())
        .filter(|&a| alignment.map[a].is_some())
        .collect();
    let mut correct = 0;
    for (e, t) in estimated.iter().zip(truth) {
        if e.support().iter().any(|&a| a >= alignment.map.len()) {
            return Err(Error::Precondition(
                "alignment does not cover the estimated classes".into(),
            ));
        }
        let mapped = e
            .restrict(&matched)
            .map_members(|a| alignment.map[a].expect("matched"));
        if mapped == t.restrict(&image) {
            correct += 1;
        }
    }
    Ok(correct as f64 / estimated.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::true_partial_info;

    #[test]
    fn flat_item_is_one_block() {
        let t = ResponseProbTable::from_binary(&[vec![0.5, 0.505, 0.498, 0.5]]).unwrap();
        let p = cluster_partial_info(&t, 0, Some(2000), &ClusterOptions::default());
        assert_eq!(p, Partition::single_block(4));
    }

    #[test]
    fn singleton_classes_survive_clustering() {
        // silhouette alone prefers 3 clusters here
        let t = ResponseProbTable::from_binary(&[vec![0.63, 0.45, 0.315, 0.9, 0.9]]).unwrap();
        let p = cluster_partial_info(&t, 0, None, &ClusterOptions::default());
        assert_eq!(p, true_partial_info(&t, 0));
        assert_eq!(p.n_blocks(), 4);
    }

    #[test]
    fn threshold_merge() {
        let t = ResponseProbTable::from_binary(&[vec![0.3, 0.3, 0.8]]).unwrap();
        let p = merge_partial_info_threshold(&t, 0, Some(2000));
        assert_eq!(p, Partition::from_blocks(vec![vec![0, 1], vec![2]]));
        // d = 2 * 0.5^2 = 0.5 > 0.0224
        let u = ResponseProbTable::from_binary(&[vec![0.25, 0.75]]).unwrap();
        assert_eq!(
            merge_partial_info_threshold(&u, 0, Some(2000)).n_blocks(),
            2
        );
    }

    #[test]
    fn accuracy_extremes() {
        let truth = vec![Partition::from_blocks(vec![vec![0, 1], vec![2]]); 2];
        let id = LabelAlignment {
            map: vec![Some(0), Some(1), Some(2)],
            cost: 0.0,
        };
        assert_eq!(partial_info_accuracy(&truth, &truth, &id).unwrap(), 1.0);
        let wrong = vec![Partition::single_block(3); 2];
        assert_eq!(partial_info_accuracy(&wrong, &truth, &id).unwrap(), 0.0);
        let swap = LabelAlignment {
            map: vec![Some(2), Some(1), Some(0)],
            cost: 0.0,
        };
        let est = vec![Partition::from_blocks(vec![vec![0], vec![1, 2]]); 2];
        assert_eq!(partial_info_accuracy(&est, &truth, &swap).unwrap(), 1.0);
    }
}
