//! K-means (k-means++ seeding, Lloyd iterations) and silhouette widths.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared distances to assigned centers.
    pub inertia: f64,
}

impl KMeans {
    /// Number of clusters with at least one member.
    pub fn n_nonempty(&self) -> usize {
        let mut seen = vec![false; self.centers.len()];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

const MAX_LLOYD_ITERATIONS: usize = 100;

fn seed_centers<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.gen_range(0..points.len())
        };
        centers.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> KMeans {
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        for (l, p) in labels.iter_mut().zip(points) {
            let best = (0..centers.len())
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .expect("k >= 1");
            if *l != best {
                *l = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (&l, p) in labels.iter().zip(points) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for ((c, s), &n) in centers.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|x| x / n as f64).collect();
            }
        }
    }
    let inertia = labels
        .iter()
        .zip(points)
        .map(|(&l, p)| sq_dist(p, &centers[l]))
        .sum();
    KMeans {
        labels,
        centers,
        inertia,
    }
}

/// Best of `restarts` k-means runs by inertia (first wins on ties).
pub fn kmeans<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> KMeans {
    assert!(
        !points.is_empty() && k >= 1,
        "k-means needs points and k >= 1"
    );
    let k = k.min(points.len());
    let mut best: Option<KMeans> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, seed_centers(points, k, rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

/// Mean silhouette width with Euclidean distance. Members of singleton
/// clusters score 0; fewer than two nonempty clusters scores 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = points.len();
    let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_clusters];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        if sizes[labels[i]] == 1 {
            continue;
        }
        let mut sums = vec![0.0; n_clusters];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += sq_dist(&points[i], &points[j]).sqrt();
            }
        }
        let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
        let b = (0..n_clusters)
            .filter(|&c| c != labels[i] && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn separates_two_groups() {
        let pts: Vec<Vec<f64>> = [0.0, 0.1, 0.05, 5.0, 5.1]
            .iter()
            .map(|&x| vec![x])
            .collect();
        let km = kmeans(&pts, 2, 5, &mut ChaCha20Rng::seed_from_u64(1));
        assert_eq!(km.labels[0], km.labels[1]);
        assert_ne!(km.labels[0], km.labels[3]);
        assert!(silhouette(&pts, &km.labels) > 0.9);
    }

    #[test]
    fn identical_points_use_one_cluster() {
        let pts = vec![vec![1.0, 2.0]; 6];
        let km = kmeans(&pts, 3, 1, &mut ChaCha20Rng::seed_from_u64(2));
        assert_eq!(km.n_nonempty(), 1);
        assert_eq!(km.inertia, 0.0);
    }

    #[test]
    fn silhouette_hand_value() {
        // clusters {0,1} and {4}: point 0 a=1 b=4 -> 0.75; point 1 a=1 b=3 -> 2/3; singleton 0
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 4.0].iter().map(|&x| vec![x]).collect();
        let s = silhouette(&pts, &[0, 0, 1]);
        assert!((s - (0.75 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
    }
}
