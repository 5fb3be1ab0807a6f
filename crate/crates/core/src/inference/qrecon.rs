//! Q-matrix reconstruction from per-item partitions and a class coding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AttributeSpace, Partition, QMatrix};

/// Largest class count for which codings are enumerated.
pub const MAX_AUTO_CLASSES: usize = 8;
/// Largest number of candidate codings enumerated.
pub const MAX_AUTO_CODINGS: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coding {
    /// `profiles[a]` is the attribute-space class index given to class `a`.
    Given(Vec<usize>),
    /// Search all injective codings for a consistent one.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QReconstruction {
    /// Attribute-space class index of each estimated class.
    pub coding: Vec<usize>,
    pub rows: Vec<Vec<u8>>,
    /// Items with a single-block partition (all-zero rows).
    pub uninformative: Vec<usize>,
}

impl QReconstruction {
    /// The Q-matrix, if every item is informative.
    pub fn q_matrix(&self) -> Result<QMatrix> {
        if !self.uninformative.is_empty() {
            return Err(Error::Domain(format!(
                "uninformative items (zero rows): {}",
                item_list(&self.uninformative)
            )));
        }
        QMatrix::new(self.rows.clone())
    }

    pub fn n_ones(&self) -> usize {
        self.rows.iter().flatten().filter(|&&x| x == 1).count()
    }
}

fn item_list(items: &[usize]) -> String {
    items
        .iter()
        .map(|j| (j + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// `q_jk = 1` iff the item separates some pair of classes whose profiles
/// differ only in attribute `k`.
pub fn q_rows_for_coding(partitions: &[Partition], profiles: &[Vec<usize>]) -> Vec<Vec<u8>> {
    let k = profiles.first().map_or(0, Vec::len);
    let m = profiles.len();
    partitions
        .iter()
        .map(|p| {
            let mut row = vec![0u8; k];
            for a in 0..m {
                for b in a + 1..m {
                    if p.same_block(a, b) {
                        continue;
                    }
                    let mut diff = (0..k).filter(|&x| profiles[a][x] != profiles[b][x]);
                    if let (Some(x), None) = (diff.next(), diff.next()) {
                        row[x] = 1;
                    }
                }
            }
            row
        })
        .collect()
}

/// Items where two classes agree on every q-attribute yet sit in different blocks.
pub fn inconsistent_items(
    partitions: &[Partition],
    profiles: &[Vec<usize>],
    rows: &[Vec<u8>],
) -> Vec<usize> {
    let m = profiles.len();
    partitions
        .iter()
        .zip(rows)
        .enumerate()
        .filter(|(_, (p, row))| {
            (0..m).any(|a| {
                (a + 1..m).any(|b| {
                    !p.same_block(a, b)
                        && row
                            .iter()
                            .enumerate()
                            .all(|(x, &q)| q == 0 || profiles[a][x] == profiles[b][x])
                })
            })
        })
        .map(|(j, _)| j)
        .collect()
}

fn build(
    partitions: &[Partition],
    profiles: &[Vec<usize>],
    coding: Vec<usize>,
) -> (QReconstruction, Vec<usize>) {
    let rows = q_rows_for_coding(partitions, profiles);
    let bad = inconsistent_items(partitions, profiles, &rows);
    let uninformative = partitions
        .iter()
        .enumerate()
        .filter(|(_, p)| p.n_blocks() <= 1)
        .map(|(j, _)| j)
        .collect();
    (
        QReconstruction {
            coding,
            rows,
            uninformative,
        },
        bad,
    )
}

fn check_partitions(partitions: &[Partition], m: usize) -> Result<()> {
    match partitions.iter().position(|p| !p.is_partition_of(m)) {
        Some(j) => Err(Error::Domain(format!(
            "item {} partition does not cover classes 1..{m}",
            j + 1
        ))),
        None => Ok(()),
    }
}

/// Reconstructs Q from partitions of the classes `0..M`. With
/// [`Coding::Auto`] every injective coding is tried (in lexicographic order)
/// and the consistent one with the fewest ones in Q is kept.
pub fn reconstruct_q(
    partitions: &[Partition],
    space: &AttributeSpace,
    coding: &Coding,
) -> Result<QReconstruction> {
    match coding {
        Coding::Given(coding) => {
            let m = coding.len();
            check_partitions(partitions, m)?;
            let mut seen = std::collections::BTreeSet::new();
            for &c in coding {
                if c >= space.n_classes() || !seen.insert(c) {
                    return Err(Error::Domain(format!(
                        "coding entry {c} is out of range or repeated"
                    )));
                }
            }
            let profiles: Vec<Vec<usize>> = coding.iter().map(|&c| space.profile(c)).collect();
            let (rec, bad) = build(partitions, &profiles, coding.clone());
            if bad.is_empty() {
                Ok(rec)
            } else {
                Err(Error::Inconsistent(format!(
                    "coding violates items {}",
                    item_list(&bad)
                )))
            }
        }
        Coding::Auto => {
            let m = partitions.first().map_or(0, |p| p.support().len());
            check_partitions(partitions, m)?;
            if m > MAX_AUTO_CLASSES {
                return Err(Error::Unsupported(format!(
                    "automatic coding is limited to {MAX_AUTO_CLASSES} classes; supply a coding"
                )));
            }
            let n = space.n_classes();
            if m > n {
                return Err(Error::Domain(format!(
                    "{m} classes but only {n} attribute profiles"
                )));
            }
            let count: u128 = (0..m).map(|i| (n - i) as u128).product();
            if count > MAX_AUTO_CODINGS {
                return Err(Error::Size {
                    what: "candidate codings".into(),
                    size: count,
                    cap: MAX_AUTO_CODINGS,
                });
            }
            let all_profiles: Vec<Vec<usize>> = space.profiles().collect();
            let mut best: Option<QReconstruction> = None;
            let mut fewest_bad: Option<Vec<usize>> = None;
            let mut coding = Vec::with_capacity(m);
            let mut used = vec![false; n];
            search(
                partitions,
                &all_profiles,
                m,
                &mut coding,
                &mut used,
                &mut best,
                &mut fewest_bad,
            );
            best.ok_or_else(|| {
                Error::Inconsistent(format!(
                    "no coding is consistent; the closest violates items {}",
                    item_list(&fewest_bad.unwrap_or_default())
                ))
            })
        }
    }
}

fn search(
    partitions: &[Partition],
    all_profiles: &[Vec<usize>],
    m: usize,
    coding: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut Option<QReconstruction>,
    fewest_bad: &mut Option<Vec<usize>>,
) {
    if coding.len() == m {
        let profiles: Vec<Vec<usize>> = coding.iter().map(|&c| all_profiles[c].clone()).collect();
        let (rec, bad) = build(partitions, &profiles, coding.clone());
        if bad.is_empty() {
            if best.as_ref().is_none_or(|b| rec.n_ones() < b.n_ones()) {
                *best = Some(rec);
            }
        } else if fewest_bad.as_ref().is_none_or(|f| bad.len() < f.len()) {
            *fewest_bad = Some(bad);
        }
        return;
    }
    for c in 0..used.len() {
        if !used[c] {
            used[c] = true;
            coding.push(c);
            search(partitions, all_profiles, m, coding, used, best, fewest_bad);
            coding.pop();
            used[c] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_on_first_attribute_gives_unit_row() {
        let space = AttributeSpace::binary(2).unwrap();
        // classes 00, 01, 10, 11; item splits on attribute 1
        let p = Partition::from_blocks(vec![vec![0, 1], vec![2, 3]]);
        let r = reconstruct_q(&[p], &space, &Coding::Given(vec![0, 1, 2, 3])).unwrap();
        assert_eq!(r.rows, vec![vec![1, 0]]);
    }

    #[test]
    fn single_block_is_flagged() {
        let space = AttributeSpace::binary(2).unwrap();
        let parts = [
            Partition::single_block(4),
            Partition::from_blocks(vec![vec![0, 2], vec![1, 3]]),
        ];
        let r = reconstruct_q(&parts, &space, &Coding::Given(vec![0, 1, 2, 3])).unwrap();
        assert_eq!(r.rows[0], vec![0, 0]);
        assert_eq!(r.uninformative, vec![0]);
        assert!(r.q_matrix().is_err());
    }

    #[test]
    fn inconsistent_coding_names_item() {
        let space = AttributeSpace::binary(2).unwrap();
        // 00 and 11 separated, but no single-coordinate pair is: q-row 00
        let p = Partition::from_blocks(vec![vec![0], vec![1]]);
        let err = reconstruct_q(&[p], &space, &Coding::Given(vec![0, 3])).unwrap_err();
        assert!(err.to_string().contains("items 1"));
    }

    #[test]
    fn auto_coding_finds_consistent_minimum() {
        let space = AttributeSpace::binary(2).unwrap();
        let p = Partition::from_blocks(vec![vec![0], vec![1]]);
        let r = reconstruct_q(&[p], &space, &Coding::Auto).unwrap();
        assert_eq!(r.n_ones(), 1);
        assert_eq!(r.coding, vec![0, 1]);
    }
}
