//! Split-merge moves on the assignments, with sticks, response probabilities
//! and slices integrated out.
//!
//! A move picks two respondents. If they share a class, that class is split
//! by sequential allocation and the second respondent's part takes a new
//! label drawn geometrically from the empty labels; otherwise the second
//! respondent's class is merged into the first's. The target is the labeled
//! collapsed posterior
//!
//! `prod_a B(1 + n_a, beta + m_a) / B(1, beta) * prod_a prod_j DirMult(counts_ja)`
//!
//! with `m_a = sum_{b>a} n_b`. The conditional Gibbs updates alone move
//! respondents between two classes with the same profile as a neutral random
//! walk, so a duplicated class survives for on the order of `n^2` sweeps.
//!
//! Callers must redraw probabilities, sticks and slices from their full
//! conditionals before anything reads them.

use libm::lgamma;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{EncodedData, SamplerState};

/// Success probability of the geometric draw over empty labels.
const NEW_LABEL_RATE: f64 = 0.5;

fn label_counts(assignments: &[usize]) -> Vec<usize> {
    let m = assignments.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0; m];
    for &z in assignments {
        counts[z] += 1;
    }
    counts
}

/// Log stick-breaking prior of labeled assignments with the sticks
/// integrated out.
fn log_label_prior(counts: &[usize], beta: f64) -> f64 {
    let last = counts.iter().rposition(|&c| c > 0).map_or(0, |p| p + 1);
    let mut rest: usize = counts.iter().sum();
    let mut total = 0.0;
    for &n in &counts[..last] {
        rest -= n;
        let (n, m) = (n as f64, rest as f64);
        total += beta.ln() + lgamma(1.0 + n) + lgamma(beta + m) - lgamma(beta + m + n + 1.0);
    }
    total
}

/// Log Dirichlet(1)-multinomial likelihood of one class.
fn log_class_likelihood(data: &EncodedData, cells: &[u32], size: usize) -> f64 {
    data.offsets
        .iter()
        .zip(&data.categories)
        .map(|(&o, &k)| {
            let k_f = k as f64;
            lgamma(k_f) - lgamma(k_f + size as f64)
                + cells[o..o + k]
                    .iter()
                    .map(|&c| lgamma(1.0 + c as f64))
                    .sum::<f64>()
        })
        .sum()
}

/// Log predictive of respondent `i` joining a class with these counts.
fn log_predictive(data: &EncodedData, cells: &[u32], size: usize, i: usize) -> f64 {
    data.row(i)
        .iter()
        .zip(&data.categories)
        .map(|(&c, &k)| data.ln_int[1 + cells[c as usize] as usize] - data.ln_int[k + size])
        .sum()
}

fn add_row(data: &EncodedData, cells: &mut [u32], i: usize) {
    for &c in data.row(i) {
        cells[c as usize] += 1;
    }
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Index among the empty labels of `counts` (labels past its end are empty).
fn empty_rank(counts: &[usize], label: usize) -> usize {
    counts.iter().take(label).filter(|&&c| c == 0).count() + label.saturating_sub(counts.len())
}

fn nth_empty(counts: &[usize], rank: usize) -> usize {
    let mut seen = 0;
    for (a, &c) in counts.iter().enumerate() {
        if c == 0 {
            if seen == rank {
                return a;
            }
            seen += 1;
        }
    }
    counts.len() + rank - seen
}

/// One Metropolis-Hastings split or merge proposal. Labels at or past
/// `max_labels` are outside the support. Returns whether the move was
/// accepted.
pub fn split_merge<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &EncodedData,
    max_labels: usize,
    rng: &mut R,
) -> bool {
    let n = data.n;
    if n < 2 {
        return false;
    }
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let (ci, cj) = (state.assignments[i], state.assignments[j]);
    let split = ci == cj;
    let mut members: Vec<usize> = (0..n)
        .filter(|&k| k != i && k != j && (state.assignments[k] == ci || state.assignments[k] == cj))
        .collect();
    members.shuffle(rng);

    let mut cells_i = vec![0u32; data.width];
    let mut cells_j = vec![0u32; data.width];
    add_row(data, &mut cells_i, i);
    add_row(data, &mut cells_j, j);
    let (mut size_i, mut size_j) = (1usize, 1usize);
    let mut to_j = Vec::new();
    let mut log_q = 0.0;
    for &k in &members {
        let li = (size_i as f64).ln() + log_predictive(data, &cells_i, size_i, k);
        let lj = (size_j as f64).ln() + log_predictive(data, &cells_j, size_j, k);
        // log P(i side) = -softplus(lj - li), log P(j side) = -softplus(li - lj)
        let go_i = if split {
            rng.gen::<f64>() < 1.0 / (1.0 + (lj - li).exp())
        } else {
            state.assignments[k] == ci
        };
        if go_i {
            log_q -= softplus(lj - li);
            add_row(data, &mut cells_i, k);
            size_i += 1;
        } else {
            log_q -= softplus(li - lj);
            add_row(data, &mut cells_j, k);
            size_j += 1;
            to_j.push(k);
        }
    }
    let merged: Vec<u32> = cells_i.iter().zip(&cells_j).map(|(a, b)| a + b).collect();
    let log_lik_gain = log_class_likelihood(data, &cells_i, size_i)
        + log_class_likelihood(data, &cells_j, size_j)
        - log_class_likelihood(data, &merged, size_i + size_j);

    let counts = label_counts(&state.assignments);
    let prior_before = log_label_prior(&counts, state.beta);
    let log_geometric =
        |rank: usize| NEW_LABEL_RATE.ln() + rank as f64 * (1.0 - NEW_LABEL_RATE).ln();

    if split {
        let mut rank = 0;
        while rng.gen::<f64>() >= NEW_LABEL_RATE {
            rank += 1;
        }
        let d = nth_empty(&counts, rank);
        if d >= max_labels {
            return false;
        }
        let mut after = counts.clone();
        after.resize(after.len().max(d + 1), 0);
        after[ci] = size_i;
        after[d] = size_j;
        let log_accept = log_lik_gain + log_label_prior(&after, state.beta)
            - prior_before
            - log_geometric(rank)
            - log_q;
        if rng.gen::<f64>().ln() >= log_accept {
            return false;
        }
        state.assignments[j] = d;
        for &k in &to_j {
            state.assignments[k] = d;
        }
        while state.sticks.len() <= d {
            // placeholders until the next conditional draws
            state.sticks.push(0.5);
            state.probs.push(vec![0.0; data.width]);
        }
        state.refresh_weights();
        true
    } else {
        let mut after = counts.clone();
        after[ci] += after[cj];
        after[cj] = 0;
        let log_accept = -log_lik_gain + log_label_prior(&after, state.beta) - prior_before
            + log_geometric(empty_rank(&after, cj))
            + log_q;
        if rng.gen::<f64>().ln() >= log_accept {
            return false;
        }
        for z in state.assignments.iter_mut() {
            if *z == cj {
                *z = ci;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_labels_are_ranked_in_order() {
        let counts = [3, 0, 2, 0, 1];
        assert_eq!(nth_empty(&counts, 0), 1);
        assert_eq!(nth_empty(&counts, 1), 3);
        assert_eq!(nth_empty(&counts, 2), 5);
        assert_eq!(nth_empty(&counts, 4), 7);
        for r in 0..6 {
            assert_eq!(empty_rank(&counts, nth_empty(&counts, r)), r);
        }
    }

    #[test]
    fn label_prior_matches_stick_expectations() {
        // E[V^2 (1 - V)] E[V] with V ~ Beta(1, beta): 2 beta / ((beta + 1)(beta + 2)(beta + 3)) * 1 / (1 + beta)
        let beta: f64 = 1.7;
        let want = 2.0 * beta / ((beta + 1.0) * (beta + 2.0) * (beta + 3.0)) / (1.0 + beta);
        assert!((log_label_prior(&[2, 1], beta) - want.ln()).abs() < 1e-12);
        // An empty first label contributes E[1 - V] = beta / (1 + beta).
        let want = beta / (1.0 + beta) / (1.0 + beta);
        assert!((log_label_prior(&[0, 1], beta) - want.ln()).abs() < 1e-12);
        assert_eq!(log_label_prior(&[], beta), 0.0);
    }
}
