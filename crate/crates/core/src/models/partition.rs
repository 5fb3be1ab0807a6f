use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// A partition of class indices into disjoint blocks.
///
/// Stored canonically: each block sorted, blocks ordered by their smallest
/// member. Two partitions are equal iff they have the same blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn from_blocks(blocks: Vec<Vec<usize>>) -> Self {
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .filter(|b| !b.is_empty())
            .map(|mut b| {
                b.sort_unstable();
                b.dedup();
                b
            })
            .collect();
        blocks.sort_by_key(|b| b[0]);
        Self { blocks }
    }

    /// Groups `0..n` by label; equal labels share a block.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut seen: Vec<(usize, usize)> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match seen.iter().find(|(lab, _)| *lab == l) {
                Some(&(_, b)) => blocks[b].push(i),
                None => {
                    seen.push((l, blocks.len()));
                    blocks.push(vec![i]);
                }
            }
        }
        Self::from_blocks(blocks)
    }

    pub fn single_block(n: usize) -> Self {
        Self::from_blocks(vec![(0..n).collect()])
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, class: usize) -> Option<usize> {
        self.blocks
            .iter()
            .position(|b| b.binary_search(&class).is_ok())
    }

    pub fn same_block(&self, a: usize, b: usize) -> bool {
        matches!((self.block_of(a), self.block_of(b)), (Some(x), Some(y)) if x == y)
    }

    /// All members across blocks.
    pub fn support(&self) -> BTreeSet<usize> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// True when blocks are disjoint and cover exactly `0..n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let total: usize = self.blocks.iter().map(Vec::len).sum();
        let support = self.support();
        total == n
            && support.len() == n
            && support.iter().next_back().map_or(n == 0, |&m| m + 1 == n)
    }

    /// Relabels members through `map` (member -> new label).
    pub fn map_members(&self, map: impl Fn(usize) -> usize) -> Self {
        Self::from_blocks(
            self.blocks
                .iter()
                .map(|b| b.iter().map(|&c| map(c)).collect())
                .collect(),
        )
    }

    /// Keeps only members in `keep`, dropping emptied blocks.
    pub fn restrict(&self, keep: &BTreeSet<usize>) -> Self {
        Self::from_blocks(
            self.blocks
                .iter()
                .map(|b| b.iter().copied().filter(|c| keep.contains(c)).collect())
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_ignores_block_order() {
        let a = Partition::from_blocks(vec![vec![3, 1], vec![0, 2]]);
        let b = Partition::from_blocks(vec![vec![2, 0], vec![1, 3]]);
        assert_eq!(a, b);
        assert_eq!(a.blocks(), &[vec![0, 2], vec![1, 3]]);
        assert!(a.is_partition_of(4));
        assert!(!a.is_partition_of(5));
    }

    #[test]
    fn labels_group_equal_values() {
        let p = Partition::from_labels(&[7, 3, 7, 9]);
        assert_eq!(p.blocks(), &[vec![0, 2], vec![1], vec![3]]);
        assert!(p.same_block(0, 2));
        assert!(!p.same_block(0, 1));
    }
}
