//! Posterior means and class truncation.

use serde::{Deserialize, Serialize};

use super::assign::{hungarian_rect, total_variation};
use crate::error::{Error, Result};
use crate::models::ResponseProbTable;
use crate::sampler::PosteriorDraws;

/// Posterior-mean response table and class weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub table: ResponseProbTable,
    /// `pi_hat`, one per class of `table`; need not sum to 1.
    pub weights: Vec<f64>,
    /// Sample size the estimate came from; `None` for exact tables.
    pub n_obs: Option<usize>,
}

impl PointEstimate {
    /// Keeps `classes`, in the given order.
    pub fn restrict(&self, classes: &[usize]) -> Result<Self> {
        Ok(Self {
            table: self.table.restrict_classes(classes)?,
            weights: classes.iter().map(|&a| self.weights[a]).collect(),
            n_obs: self.n_obs,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }
}

struct Slots {
    width: usize,
    probs: Vec<Vec<f64>>,
    counts: Vec<usize>,
    weights: Vec<f64>,
}

fn accumulate(draws: &PosteriorDraws, reference: &[Vec<f64>]) -> Slots {
    let width: usize = draws.categories().iter().sum();
    let offsets: Vec<usize> = draws
        .categories()
        .iter()
        .scan(0, |acc, &k| {
            let o = *acc;
            *acc += k;
            Some(o)
        })
        .collect();
    let tv = |x: &[f64], y: &[f64]| -> f64 {
        offsets
            .iter()
            .zip(draws.categories())
            .map(|(&o, &k)| total_variation(&x[o..o + k], &y[o..o + k]))
            .sum()
    };
    let mut slots = Slots {
        width,
        probs: reference.iter().map(|_| vec![0.0; width]).collect(),
        counts: vec![0; reference.len()],
        weights: vec![0.0; reference.len()],
    };
    for d in &draws.draws {
        let class = |a: usize| &d.probs[a * width..(a + 1) * width];
        let cost: Vec<Vec<f64>> = (0..d.n_classes())
            .map(|a| reference.iter().map(|r| tv(class(a), r)).collect())
            .collect();
        let matched = hungarian_rect(&cost);
        let mut spill: Vec<usize> = (0..d.n_classes())
            .filter(|&a| matched[a].is_none())
            .collect();
        spill.sort_by(|&a, &b| d.weights[b].total_cmp(&d.weights[a]).then(a.cmp(&b)));
        let mut target: Vec<usize> = matched.iter().map(|m| m.unwrap_or(usize::MAX)).collect();
        for (extra, &a) in spill.iter().enumerate() {
            target[a] = reference.len() + extra;
        }
        for (a, &s) in target.iter().enumerate() {
            while slots.counts.len() <= s {
                slots.probs.push(vec![0.0; width]);
                slots.counts.push(0);
                slots.weights.push(0.0);
            }
            for (acc, x) in slots.probs[s].iter_mut().zip(class(a)) {
                *acc += x;
            }
            slots.counts[s] += 1;
            slots.weights[s] += d.weights[a];
        }
    }
    slots
}

fn slot_means(slots: &Slots) -> Vec<Vec<f64>> {
    slots
        .probs
        .iter()
        .zip(&slots.counts)
        .map(|(p, &c)| p.iter().map(|x| x / c.max(1) as f64).collect())
        .collect()
}

/// Per-class posterior means across retained draws.
///
/// Class labels can switch between draws, so each draw's classes are matched
/// to reference classes by minimum summed TV distance before averaging: first
/// against the first draw, then again against the resulting means. Classes
/// left unmatched go to trailing slots in decreasing-weight order. `pi_hat`
/// averages over all draws (absent classes count as 0); `p_hat` averages over
/// the draws containing the class, renormalized per item. Output classes are
/// sorted by decreasing `pi_hat`.
pub fn posterior_mean(draws: &PosteriorDraws) -> Result<PointEstimate> {
    let first = draws
        .draws
        .first()
        .ok_or_else(|| Error::Precondition("no retained draws".into()))?;
    let width: usize = draws.categories().iter().sum();
    let reference: Vec<Vec<f64>> = first.probs.chunks(width).map(<[f64]>::to_vec).collect();
    let pass1 = accumulate(draws, &reference);
    let slots = accumulate(draws, &slot_means(&pass1));
    let n_draws = draws.len() as f64;
    let means = slot_means(&slots);
    let mut order: Vec<usize> = (0..means.len()).filter(|&s| slots.counts[s] > 0).collect();
    order.sort_by(|&a, &b| {
        slots.weights[b]
            .total_cmp(&slots.weights[a])
            .then(a.cmp(&b))
    });
    let mut probs = vec![Vec::with_capacity(order.len()); draws.n_items()];
    let mut offset = 0;
    for (j, &k) in draws.categories().iter().enumerate() {
        for &s in &order {
            let d = &means[s][offset..offset + k];
            let total: f64 = d.iter().sum();
            probs[j].push(d.iter().map(|x| x / total).collect());
        }
        offset += k;
    }
    debug_assert_eq!(offset, slots.width);
    Ok(PointEstimate {
        table: ResponseProbTable::new(probs)?,
        weights: order.iter().map(|&s| slots.weights[s] / n_draws).collect(),
        n_obs: Some(draws.n_obs),
    })
}

/// Outcome of dropping small classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Retained class indices, by decreasing weight.
    pub retained: Vec<usize>,
    pub threshold: f64,
    pub discarded_mass: f64,
    pub max_discarded: f64,
    /// Discarded class weights, decreasing.
    pub discarded: Vec<f64>,
}

/// Default retention threshold `n^{-1/2}`.
pub fn default_threshold(n: usize) -> f64 {
    1.0 / (n.max(1) as f64).sqrt()
}

/// Keeps classes with `pi_hat >= threshold` (default `n^{-1/2}`).
pub fn truncate_classes(
    est: &PointEstimate,
    n: usize,
    threshold: Option<f64>,
) -> Result<Truncation> {
    let threshold = threshold.unwrap_or_else(|| default_threshold(n));
    let mut retained: Vec<usize> = (0..est.n_classes())
        .filter(|&a| est.weights[a] >= threshold)
        .collect();
    if retained.is_empty() {
        return Err(Error::Domain(format!(
            "degenerate fit: no class weight reaches the threshold {threshold:.4}"
        )));
    }
    retained.sort_by(|&a, &b| est.weights[b].total_cmp(&est.weights[a]).then(a.cmp(&b)));
    let mut discarded: Vec<f64> = (0..est.n_classes())
        .filter(|a| !retained.contains(a))
        .map(|a| est.weights[a])
        .collect();
    discarded.sort_by(|a, b| b.total_cmp(a));
    Ok(Truncation {
        retained,
        threshold,
        discarded_mass: discarded.iter().sum(),
        max_discarded: discarded.first().copied().unwrap_or(0.0),
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Draw;

    fn draws(list: &[(Vec<f64>, Vec<f64>)]) -> PosteriorDraws {
        let mut d = PosteriorDraws::new(vec![2], 100);
        for (i, (w, p)) in list.iter().enumerate() {
            d.push(Draw {
                iteration: i,
                beta: 1.0,
                weights: w.clone(),
                probs: p.clone(),
            })
            .unwrap();
        }
        d
    }

    #[test]
    fn empty_draws_error() {
        assert!(posterior_mean(&PosteriorDraws::new(vec![2], 1)).is_err());
    }

    #[test]
    fn single_draw_is_itself() {
        let d = draws(&[(vec![0.7, 0.2], vec![0.1, 0.9, 0.8, 0.2])]);
        let e = posterior_mean(&d).unwrap();
        assert_eq!(e.weights, vec![0.7, 0.2]);
        assert_eq!(e.table.dist(0, 0), &[0.1, 0.9]);
    }

    #[test]
    fn one_class_two_draws_average() {
        let d = draws(&[(vec![1.0], vec![0.4, 0.6]), (vec![1.0], vec![0.6, 0.4])]);
        let e = posterior_mean(&d).unwrap();
        assert!((e.table.dist(0, 0)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn switched_labels_are_realigned() {
        let d = draws(&[
            (vec![0.5, 0.5], vec![0.1, 0.9, 0.9, 0.1]),
            (vec![0.5, 0.5], vec![0.9, 0.1, 0.1, 0.9]),
        ]);
        let e = posterior_mean(&d).unwrap();
        let mut pos: Vec<f64> = (0..2).map(|a| e.table.positive(0, a)).collect();
        pos.sort_by(f64::total_cmp);
        assert_eq!(pos, vec![0.1, 0.9]);
    }

    #[test]
    fn truncation_threshold() {
        let t = ResponseProbTable::from_binary(&[vec![0.1, 0.5, 0.9, 0.3]]).unwrap();
        let est = PointEstimate {
            table: t,
            weights: vec![0.49, 0.5, 0.003, 0.007],
            n_obs: Some(2000),
        };
        let tr = truncate_classes(&est, 2000, None).unwrap();
        assert_eq!(tr.retained, vec![1, 0]);
        assert!((tr.discarded_mass - 0.01).abs() < 1e-15);
        assert_eq!(tr.max_discarded, 0.007);
        assert!(truncate_classes(&est, 2000, Some(0.6)).is_err());
    }
}
