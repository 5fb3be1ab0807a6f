//! Synthetic response data from a latent class model, and the dataset file format.
//!
//! Dataset files are CSV with a header of `name:k` tokens (item name and
//! category count); each following row holds one respondent's responses as
//! integers `1..=k`. True class labels, when known, go to a sidecar file
//! `<path>.labels` with header `class` and one 0-based class index per row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ResponseProbTable;

/// Tolerance on `sum pi = 1`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Latent class proportions. Zero entries are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixtureWeights(Vec<f64>);

impl MixtureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("mixture weights are empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Domain(format!(
                "mixture weight {w} is negative or non-finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Domain(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Rescales nonnegative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Domain(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Class indices with positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&a| self.0[a] > 0.0).collect()
    }

    pub fn all_positive(&self) -> bool {
        self.0.iter().all(|&w| w > 0.0)
    }

    /// Weights over `classes`, renormalized.
    pub fn restrict(&self, classes: &[usize]) -> Result<Self> {
        Self::normalized(classes.iter().map(|&a| self.0[a]).collect())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl TryFrom<Vec<f64>> for MixtureWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MixtureWeights> for Vec<f64> {
    fn from(w: MixtureWeights) -> Self {
        w.0
    }
}

/// Rectangular categorical responses, values `1..=k_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    categories: Vec<usize>,
    responses: Vec<u16>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    /// `rows[i][j]` is respondent `i`'s response to item `j`, in `1..=categories[j]`.
    pub fn new(
        categories: Vec<usize>,
        rows: Vec<Vec<u16>>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if categories.iter().any(|&k| k < 2 || k > u16::MAX as usize) {
            return Err(Error::Domain(
                "every item needs 2..=65535 categories".into(),
            ));
        }
        let j = categories.len();
        let mut responses = Vec::with_capacity(rows.len() * j);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != j {
                return Err(Error::Domain(format!(
                    "row {} has {} responses, expected {j}",
                    i + 1,
                    row.len()
                )));
            }
            for (item, (&y, &k)) in row.iter().zip(&categories).enumerate() {
                if y == 0 || y as usize > k {
                    return Err(Error::Domain(format!(
                        "row {} item {}: response {y} outside 1..={k}",
                        i + 1,
                        item + 1
                    )));
                }
            }
            responses.extend_from_slice(row);
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::Domain("label count does not match row count".into()));
            }
        }
        Ok(Self {
            categories,
            responses,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        if self.categories.is_empty() {
            0
        } else {
            self.responses.len() / self.categories.len()
        }
    }

    pub fn n_items(&self) -> usize {
        self.categories.len()
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn row(&self, i: usize) -> &[u16] {
        let j = self.categories.len();
        &self.responses[i * j..(i + 1) * j]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn labels_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".labels");
        PathBuf::from(s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self
            .categories
            .iter()
            .enumerate()
            .map(|(j, k)| format!("item{}:{k}", j + 1))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n_rows() {
            let cells: Vec<String> = self.row(i).iter().map(u16::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the CSV format. Header tokens without `:k` take `k` from the
    /// largest observed value (at least 2).
    pub fn parse_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 1, "missing header"))?;
        let declared: Vec<Option<usize>> = header
            .split(',')
            .map(|tok| match tok.trim().rsplit_once(':') {
                Some((_, k)) => k.parse::<usize>().map(Some).map_err(|_| {
                    Error::parse(source_name, 1, format!("bad category count in {tok:?}"))
                }),
                None => Ok(None),
            })
            .collect::<Result<_>>()?;
        let j = declared.len();
        let mut rows = Vec::new();
        for (lineno, line) in lines {
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<u16>().map_err(|_| {
                        Error::parse(
                            source_name,
                            lineno + 1,
                            format!("not a response value: {tok:?}"),
                        )
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != j {
                return Err(Error::parse(
                    source_name,
                    lineno + 1,
                    format!(
                        "row {} has {} fields, expected {j}",
                        rows.len() + 1,
                        row.len()
                    ),
                ));
            }
            for (item, (&y, k)) in row.iter().zip(&declared).enumerate() {
                if y == 0 || k.is_some_and(|k| y as usize > k) {
                    return Err(Error::parse(
                        source_name,
                        lineno + 1,
                        format!(
                            "item {} response {y} out of range 1..={}",
                            item + 1,
                            k.unwrap_or(u16::MAX as usize)
                        ),
                    ));
                }
            }
            rows.push(row);
        }
        let categories = declared
            .iter()
            .enumerate()
            .map(|(item, k)| {
                k.unwrap_or_else(|| {
                    rows.iter()
                        .map(|r| r[item] as usize)
                        .max()
                        .unwrap_or(2)
                        .max(2)
                })
            })
            .collect();
        Self::new(categories, rows, None)
    }

    /// Reads a dataset, attaching sidecar labels when present.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut ds = Self::parse_csv(&text, &path.display().to_string())?;
        let lp = Self::labels_path(path);
        if lp.exists() {
            let text = std::fs::read_to_string(&lp).map_err(|e| Error::io(&lp, e))?;
            let labels = text
                .lines()
                .enumerate()
                .skip(1)
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(n, l)| {
                    l.trim().parse::<usize>().map_err(|_| {
                        Error::parse(lp.display().to_string(), n + 1, "bad class label")
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if labels.len() != ds.n_rows() {
                return Err(Error::parse(
                    lp.display().to_string(),
                    labels.len() + 1,
                    "label count mismatch",
                ));
            }
            ds.labels = Some(labels);
        }
        Ok(ds)
    }

    /// Writes the main file and, if labels are present, the sidecar.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))?;
        if let Some(labels) = &self.labels {
            let lp = Self::labels_path(path);
            let mut out = String::from("class\n");
            for l in labels {
                let _ = writeln!(out, "{l}");
            }
            std::fs::write(&lp, out).map_err(|e| Error::io(&lp, e))?;
        }
        Ok(())
    }
}

/// RNG for replicate `stream` under `seed`. Each replicate owns a disjoint
/// ChaCha20 stream, so results do not depend on scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` respondents: class from `weights`, then each item independently.
pub fn simulate(
    table: &ResponseProbTable,
    weights: &MixtureWeights,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    simulate_with(table, weights, n, &mut stream_rng(seed, 0))
}

pub fn simulate_with<R: Rng>(
    table: &ResponseProbTable,
    weights: &MixtureWeights,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    if weights.len() != table.n_classes() {
        return Err(Error::Domain(format!(
            "{} weights for {} classes",
            weights.len(),
            table.n_classes()
        )));
    }
    let class_dist = WeightedIndex::new(weights.as_slice())
        .map_err(|e| Error::Domain(format!("invalid mixture weights: {e}")))?;
    let j = table.n_items();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a = class_dist.sample(rng);
        let row = (0..j)
            .map(|item| sample_category(table.dist(item, a), rng))
            .collect();
        rows.push(row);
        labels.push(a);
    }
    Dataset::new(table.categories().to_vec(), rows, Some(labels))
}

/// 1-based category drawn from `dist` by inversion.
fn sample_category<R: Rng>(dist: &[f64], rng: &mut R) -> u16 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (y, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return (y + 1) as u16;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    dist.iter()
        .rposition(|&p| p > 0.0)
        .map_or(1, |y| (y + 1) as u16)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_validation() {
        assert!(MixtureWeights::new(vec![0.5, 0.4]).is_err());
        assert!(MixtureWeights::new(vec![1.5, -0.5]).is_err());
        let w = MixtureWeights::new(vec![0.0, 0.25, 0.75]).unwrap();
        assert_eq!(w.support(), vec![1, 2]);
        assert!(!w.all_positive());
    }

    #[test]
    fn point_mass_and_deterministic_item() {
        let t = ResponseProbTable::new(vec![vec![vec![0.5, 0.5], vec![0.0, 1.0]]]).unwrap();
        let w = MixtureWeights::new(vec![0.0, 1.0]).unwrap();
        let ds = simulate(&t, &w, 50, 1).unwrap();
        assert!((0..50).all(|i| ds.row(i) == [2]));
        assert!(ds.labels().unwrap().iter().all(|&l| l == 1));
    }

    #[test]
    fn same_seed_same_data() {
        let t = ResponseProbTable::from_binary(&[vec![0.2, 0.7], vec![0.5, 0.9]]).unwrap();
        let w = MixtureWeights::uniform(2);
        assert_eq!(
            simulate(&t, &w, 200, 42).unwrap(),
            simulate(&t, &w, 200, 42).unwrap()
        );
        assert_ne!(
            simulate(&t, &w, 200, 42).unwrap(),
            simulate(&t, &w, 200, 43).unwrap()
        );
    }

    #[test]
    fn zero_rows_rejected() {
        let t = ResponseProbTable::from_binary(&[vec![0.2]]).unwrap();
        assert!(simulate(&t, &MixtureWeights::uniform(1), 0, 1).is_err());
    }

    #[test]
    fn csv_errors_name_the_row() {
        match Dataset::parse_csv("a:2,b:2\n1,2\n2\n", "d.csv") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("row 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Dataset::parse_csv("a:2\n0\n", "d.csv"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Dataset::parse_csv("a:2\n3\n", "d.csv"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let t =
            ResponseProbTable::new(vec![vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.3, 0.1]]]).unwrap();
        let ds = simulate(&t, &MixtureWeights::uniform(2), 30, 7).unwrap();
        ds.write(&path).unwrap();
        let main = std::fs::read_to_string(&path).unwrap();
        assert!(
            !main.contains("class"),
            "labels must stay out of the main file"
        );
        assert_eq!(Dataset::read(&path).unwrap(), ds);
    }
}
