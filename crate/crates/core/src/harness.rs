//! Replication studies: simulate, fit, truncate, align and evaluate over `R`
//! seeds, then aggregate means and MSEs against the generating model.
//!
//! Replicate `r` (1-based) simulates from stream `2r` and samples from stream
//! `2r + 1` of the master seed, so results do not depend on scheduling.
//! Replicates are reduced in index order; the report holds no timing data
//! (wall-clock times go to a separate file).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{self, Design};
use crate::error::{Error, Result};
use crate::inference::{
    align_labels, back_solve_params, cluster_all, merge_partial_info_threshold,
    partial_info_accuracy, posterior_mean, truncate_classes, ClusterOptions, LabelAlignment,
    PointEstimate,
};
use crate::models::{true_partial_info, AttributeSpace, ModelParams, QMatrix, ResponseProbTable};
use crate::sampler::{run_chain_with, SamplerConfig};
use crate::simulate::{simulate_with, stream_rng, MixtureWeights};

pub const ENV_WORKERS: &str = "DCM_WORKERS";
pub const ENV_OUTPUT_DIR: &str = "DCM_OUTPUT_DIR";

/// Discarded class weights kept per replicate.
pub const LEADING_DISCARDED: usize = 4;

/// Where the generating model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignSource {
    /// One of the shipped designs (`nida`, `reduced_ncrum`, `lcdm`).
    Builtin {
        builtin: String,
    },
    /// Model, Q and weight files; relative paths resolve against the config file.
    Files {
        model: PathBuf,
        q: PathBuf,
        pi: PathBuf,
        #[serde(default)]
        levels: Option<Vec<usize>>,
        #[serde(default)]
        report_order: Option<Vec<usize>>,
    },
    Inline(Box<Design>),
}

impl DesignSource {
    pub fn resolve(&self, base: &Path) -> Result<Design> {
        match self {
            DesignSource::Builtin { builtin } => designs::by_name(builtin)
                .ok_or_else(|| Error::Domain(format!("unknown design '{builtin}'"))),
            DesignSource::Files {
                model,
                q,
                pi,
                levels,
                report_order,
            } => {
                let q = QMatrix::read_csv(base.join(q))?;
                let levels = match levels {
                    Some(l) => AttributeSpace::new(l.clone())?,
                    None => AttributeSpace::binary(q.n_attributes())?,
                };
                let model = ModelParams::read_json(base.join(model))?;
                model.validate(&q)?;
                Ok(Design {
                    name: "custom".into(),
                    q,
                    levels,
                    model,
                    weights: MixtureWeights::read_json(base.join(pi))?,
                    report_order: report_order.clone(),
                })
            }
            DesignSource::Inline(d) => Ok((**d).clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluation {
    pub partial_info: bool,
    pub back_solve: bool,
    /// Skip simulation and sampling; evaluate the true table as the estimate.
    pub oracle: bool,
    pub cluster: ClusterOptions,
    /// Class retention threshold; `n^{-1/2}` when absent.
    pub threshold: Option<f64>,
}

impl Default for Evaluation {
    fn default() -> Self {
        Self {
            partial_info: true,
            back_solve: true,
            oracle: false,
            cluster: ClusterOptions::default(),
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub design: DesignSource,
    pub n: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub evaluation: Evaluation,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Relative paths resolve against the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory relative design files resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_replicates() -> usize {
    20
}

impl StudyConfig {
    pub fn new(design: Design, n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            design: DesignSource::Inline(Box::new(design)),
            n,
            replicates,
            seed,
            sampler: SamplerConfig::default(),
            evaluation: Evaluation::default(),
            workers: None,
            output_dir: None,
            base_dir: PathBuf::from("."),
        }
    }

    /// Reads a JSON config; design files must exist.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: StudyConfig = serde_json::from_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(dir) = cfg.output_dir.as_mut().filter(|d| d.is_relative()) {
            *dir = cfg.base_dir.join(&*dir);
        }
        if let DesignSource::Files { model, q, pi, .. } = &cfg.design {
            for f in [model, q, pi] {
                let full = cfg.base_dir.join(f);
                if !full.is_file() {
                    return Err(Error::io(
                        full,
                        std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            "referenced file does not exist",
                        ),
                    ));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Domain("replicate count must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Domain("sample size must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Domain("worker count must be at least 1".into()));
        }
        if !self.evaluation.oracle {
            self.sampler.validate()?;
        }
        Ok(())
    }

    /// Applies `DCM_WORKERS` and `DCM_OUTPUT_DIR` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(w) = std::env::var(ENV_WORKERS) {
            let w = w.trim().parse().map_err(|_| {
                Error::Usage(format!(
                    "{ENV_WORKERS} must be a positive integer, got '{w}'"
                ))
            })?;
            self.workers = Some(w);
        }
        if let Ok(d) = std::env::var(ENV_OUTPUT_DIR) {
            self.output_dir = Some(PathBuf::from(d));
        }
        self.validate()
    }
}

/// Mean and MSE of one scalar across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub label: String,
    pub truth: f64,
    pub mean: Option<f64>,
    pub mse: Option<f64>,
    /// Replicates contributing a value.
    pub count: usize,
}

impl CellStat {
    fn from_values(label: String, truth: f64, values: &[f64]) -> Self {
        let count = values.len();
        let (mean, mse) = if count == 0 {
            (None, None)
        } else {
            let c = count as f64;
            (
                Some(values.iter().sum::<f64>() / c),
                Some(values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / c),
            )
        };
        Self {
            label,
            truth,
            mean,
            mse,
            count,
        }
    }

    pub fn bias(&self) -> Option<f64> {
        self.mean.map(|m| m - self.truth)
    }
}

/// Response-probability cell `p^y_{j,c}` for reported class `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbCell {
    pub item: usize,
    pub class: usize,
    pub category: usize,
    pub stat: CellStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub retained: usize,
    pub discarded_mass: f64,
    pub max_discarded: f64,
    /// Largest discarded class weights, decreasing (at most
    /// [`LEADING_DISCARDED`]).
    pub leading_discarded: Vec<f64>,
    pub partial_info_accuracy: Option<f64>,
    /// Items where threshold merging and clustering agree.
    pub merge_agreement: Option<f64>,
    pub back_solve_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub replicate: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub design: String,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Reported class labels (`C1`, ...) and their attribute profiles.
    pub classes: Vec<String>,
    pub profiles: Vec<String>,
    pub true_classes: usize,
    pub weights: Vec<CellStat>,
    pub probs: Vec<ProbCell>,
    pub params: Vec<CellStat>,
    pub partial_info_accuracy: Option<f64>,
    pub merge_agreement: Option<f64>,
    pub per_replicate: Vec<ReplicateSummary>,
    pub excluded: Vec<Exclusion>,
}

impl StudyReport {
    pub fn included(&self) -> usize {
        self.per_replicate.len()
    }

    pub fn mean_discarded_mass(&self) -> Option<f64> {
        mean(self.per_replicate.iter().map(|r| r.discarded_mass))
    }

    pub fn max_discarded(&self) -> Option<f64> {
        self.per_replicate
            .iter()
            .map(|r| r.max_discarded)
            .reduce(f64::max)
    }

    /// Mean over replicates of the `r`-th largest discarded weight (zero
    /// where a replicate discarded fewer classes), for `r = 1..=LEADING_DISCARDED`.
    /// This is the discarded-class row of a replicate-averaged weight table.
    pub fn mean_discarded_by_rank(&self) -> Vec<f64> {
        let n = self.per_replicate.len();
        if n == 0 {
            return Vec::new();
        }
        (0..LEADING_DISCARDED)
            .map(|r| {
                self.per_replicate
                    .iter()
                    .map(|s| s.leading_discarded.get(r).copied().unwrap_or(0.0))
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    pub fn param(&self, label: &str) -> Option<&CellStat> {
        self.params.iter().find(|p| p.label == label)
    }

    pub fn prob(&self, item: usize, class: usize) -> Option<&CellStat> {
        self.probs
            .iter()
            .find(|c| c.item == item && c.class == class && c.category == 1)
            .map(|c| &c.stat)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Named scalar parameters, e.g. `s[1]`, `r[10,2]`, `lambda[16,123]` (1-based).
pub fn flatten_params(params: &ModelParams) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let per_attr = |out: &mut Vec<(String, f64)>, name: &str, v: &[Vec<Option<f64>>]| {
        for (j, row) in v.iter().enumerate() {
            for (k, x) in row.iter().enumerate() {
                if let Some(x) = x {
                    out.push((format!("{name}[{},{}]", j + 1, k + 1), *x));
                }
            }
        }
    };
    match params {
        ModelParams::Dina { slip, guess } | ModelParams::Dino { slip, guess } => {
            for (j, (s, g)) in slip.iter().zip(guess).enumerate() {
                out.push((format!("s[{}]", j + 1), *s));
                out.push((format!("g[{}]", j + 1), *g));
            }
        }
        ModelParams::Nida { slip, guess } => {
            per_attr(&mut out, "s", slip);
            per_attr(&mut out, "g", guess);
        }
        ModelParams::ReducedNcRum { phi, penalty } => {
            for (j, p) in phi.iter().enumerate() {
                out.push((format!("phi[{}]", j + 1), *p));
            }
            per_attr(&mut out, "r", penalty);
        }
        ModelParams::Crum { intercept, slope } => {
            for (j, b) in intercept.iter().enumerate() {
                out.push((format!("eta[{}]", j + 1), *b));
            }
            per_attr(&mut out, "lambda", slope);
        }
        ModelParams::Lcdm { intercept, terms } => {
            for (j, (b, ts)) in intercept.iter().zip(terms).enumerate() {
                out.push((format!("eta[{}]", j + 1), *b));
                for t in ts {
                    let attrs: String = t.attributes.iter().map(|k| (k + 1).to_string()).collect();
                    out.push((format!("lambda[{},{attrs}]", j + 1), t.weight));
                }
            }
        }
        ModelParams::Saturated { .. } => {}
    }
    out
}

struct ReplicateResult {
    summary: ReplicateSummary,
    /// `[item][reported class]` aligned distribution, if matched.
    probs: Vec<Vec<Option<Vec<f64>>>>,
    weights: Vec<f64>,
    params: Vec<(String, f64)>,
}

struct Prepared {
    design: Design,
    full_table: ResponseProbTable,
    truth: ResponseProbTable,
    truth_weights: MixtureWeights,
    true_partitions: Vec<crate::models::Partition>,
}

fn run_replicate(cfg: &StudyConfig, prep: &Prepared, r: usize) -> Result<ReplicateResult> {
    let eval = &cfg.evaluation;
    let (estimate, n_obs, truncation) = if eval.oracle {
        let est = PointEstimate {
            table: prep.truth.clone(),
            weights: prep.truth_weights.as_slice().to_vec(),
            n_obs: None,
        };
        let tr = truncate_classes(&est, cfg.n, Some(0.0))?;
        (est, None, tr)
    } else {
        let data = simulate_with(
            &prep.full_table,
            &prep.design.weights,
            cfg.n,
            &mut stream_rng(cfg.seed, 2 * r as u64),
        )?;
        let mut sampler = cfg.sampler.clone();
        sampler.seed = cfg.seed;
        sampler.stream = 2 * r as u64 + 1;
        let draws = run_chain_with(
            &data,
            &sampler,
            &mut stream_rng(sampler.seed, sampler.stream),
        )?;
        let est = posterior_mean(&draws)?;
        let tr = truncate_classes(&est, cfg.n, eval.threshold)?;
        (est.restrict(&tr.retained)?, Some(cfg.n), tr)
    };
    let alignment: LabelAlignment = align_labels(&estimate.table, &prep.truth)?;
    let m_true = prep.truth.n_classes();
    let matched: Vec<Option<usize>> = (0..m_true).map(|c| alignment.inverse(c)).collect();
    let probs = (0..prep.truth.n_items())
        .map(|j| {
            matched
                .iter()
                .map(|m| m.map(|a| estimate.table.dist(j, a).to_vec()))
                .collect()
        })
        .collect();
    let weights = matched
        .iter()
        .map(|m| m.map_or(0.0, |a| estimate.weights[a]))
        .collect();

    let (mut accuracy, mut agreement) = (None, None);
    if eval.partial_info {
        let est_parts = cluster_all(&estimate.table, n_obs, &eval.cluster);
        accuracy = Some(partial_info_accuracy(
            &est_parts,
            &prep.true_partitions,
            &alignment,
        )?);
        let agree = est_parts
            .iter()
            .enumerate()
            .filter(|(j, p)| merge_partial_info_threshold(&estimate.table, *j, n_obs) == **p)
            .count();
        agreement = Some(agree as f64 / est_parts.len().max(1) as f64);
    }

    let mut params = Vec::new();
    let mut back_solve_error = None;
    let family = prep.design.model.family();
    if eval.back_solve && !matches!(prep.design.model, ModelParams::Saturated { .. }) {
        let profiles = prep.design.reported_profiles();
        let pairs: Vec<(usize, usize)> = matched
            .iter()
            .enumerate()
            .filter_map(|(c, m)| m.map(|a| (c, a)))
            .collect();
        let est_classes: Vec<usize> = pairs.iter().map(|&(_, a)| a).collect();
        let class_profiles: Vec<Vec<usize>> =
            pairs.iter().map(|&(c, _)| profiles[c].clone()).collect();
        match estimate
            .table
            .restrict_classes(&est_classes)
            .and_then(|t| back_solve_params(&t, &prep.design.q, family, &class_profiles))
        {
            Ok(b) => params = flatten_params(&b.params),
            Err(e) => back_solve_error = Some(e.to_string()),
        }
    }
    Ok(ReplicateResult {
        summary: ReplicateSummary {
            replicate: r,
            retained: estimate.n_classes(),
            discarded_mass: truncation.discarded_mass,
            max_discarded: truncation.max_discarded,
            leading_discarded: truncation
                .discarded
                .iter()
                .take(LEADING_DISCARDED)
                .copied()
                .collect(),
            partial_info_accuracy: accuracy,
            merge_agreement: agreement,
            back_solve_error,
        },
        probs,
        weights,
        params,
    })
}

/// Per-replicate wall-clock seconds, kept out of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub replicate_seconds: Vec<f64>,
}

/// Runs the study. Sampler faults and degenerate fits exclude the replicate.
pub fn run_study(cfg: &StudyConfig) -> Result<(StudyReport, Timing)> {
    cfg.validate()?;
    let start = Instant::now();
    let design = cfg.design.resolve(&cfg.base_dir)?;
    let (truth, truth_weights) = design.truth()?;
    let prep = Prepared {
        full_table: design.table()?,
        true_partitions: (0..truth.n_items())
            .map(|j| true_partial_info(&truth, j))
            .collect(),
        truth,
        truth_weights,
        design,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    let outcomes: Vec<(Result<ReplicateResult>, f64)> = pool.install(|| {
        (1..=cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let t = Instant::now();
                (run_replicate(cfg, &prep, r), t.elapsed().as_secs_f64())
            })
            .collect()
    });
    let mut excluded = Vec::new();
    let mut results = Vec::new();
    let mut seconds = Vec::new();
    for (r, (res, secs)) in outcomes.into_iter().enumerate() {
        seconds.push(secs);
        match res {
            Ok(x) => results.push(x),
            Err(e @ (Error::SamplerFault { .. } | Error::Domain(_))) => excluded.push(Exclusion {
                replicate: r + 1,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let report = aggregate(cfg, &prep, results, excluded);
    Ok((
        report,
        Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            replicate_seconds: seconds,
        },
    ))
}

fn aggregate(
    cfg: &StudyConfig,
    prep: &Prepared,
    results: Vec<ReplicateResult>,
    excluded: Vec<Exclusion>,
) -> StudyReport {
    let m = prep.truth.n_classes();
    let classes: Vec<String> = (1..=m).map(|c| format!("C{c}")).collect();
    let profiles = prep
        .design
        .reported_profiles()
        .iter()
        .map(|p| p.iter().map(|v| v.to_string()).collect())
        .collect();
    let weights = (0..m)
        .map(|c| {
            let vals: Vec<f64> = results.iter().map(|r| r.weights[c]).collect();
            CellStat::from_values(classes[c].clone(), prep.truth_weights.as_slice()[c], &vals)
        })
        .collect();
    let mut probs = Vec::new();
    for j in 0..prep.truth.n_items() {
        for c in 0..m {
            for y in 1..prep.truth.categories()[j] {
                let vals: Vec<f64> = results
                    .iter()
                    .filter_map(|r| r.probs[j][c].as_ref().map(|d| d[y]))
                    .collect();
                probs.push(ProbCell {
                    item: j,
                    class: c,
                    category: y,
                    stat: CellStat::from_values(
                        format!("p[{},{}]:{}", j + 1, classes[c], y + 1),
                        prep.truth.dist(j, c)[y],
                        &vals,
                    ),
                });
            }
        }
    }
    let mut params = Vec::new();
    if cfg.evaluation.back_solve {
        let truth: BTreeMap<String, f64> = flatten_params(&prep.design.model).into_iter().collect();
        let mut names: Vec<String> = flatten_params(&prep.design.model)
            .into_iter()
            .map(|(n, _)| n)
            .collect();
        for r in &results {
            for (n, _) in &r.params {
                if !names.contains(n) {
                    names.push(n.clone());
                }
            }
        }
        for name in names {
            let vals: Vec<f64> = results
                .iter()
                .filter_map(|r| r.params.iter().find(|(n, _)| *n == name).map(|(_, v)| *v))
                .collect();
            let t = truth.get(&name).copied().unwrap_or(0.0);
            params.push(CellStat::from_values(name, t, &vals));
        }
    }
    let per_replicate: Vec<ReplicateSummary> = results.into_iter().map(|r| r.summary).collect();
    StudyReport {
        design: prep.design.name.clone(),
        n: cfg.n,
        replicates: cfg.replicates,
        seed: cfg.seed,
        classes,
        profiles,
        true_classes: m,
        weights,
        probs,
        params,
        partial_info_accuracy: mean(per_replicate.iter().filter_map(|r| r.partial_info_accuracy)),
        merge_agreement: mean(per_replicate.iter().filter_map(|r| r.merge_agreement)),
        per_replicate,
        excluded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(Error::Usage(format!(
                "unknown report format '{other}' (text|structured)"
            ))),
        }
    }
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const TIMING_JSON: &str = "timing.json";

fn fmt_opt(x: Option<f64>, prec: usize) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.prec$}"))
}

fn fmt_mse(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.1e}"))
}

/// Plain-text tables: class weights, response probabilities (mean and MSE
/// per item and class), back-solved parameters, and replicate summaries.
pub fn render_text(report: &StudyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "design {} | n = {} | replicates {} ({} included, {} excluded) | seed {}",
        report.design,
        report.n,
        report.replicates,
        report.included(),
        report.excluded.len(),
        report.seed
    );
    let _ = writeln!(s, "\nclass weights");
    let _ = writeln!(
        s,
        "{:<6}{:<9}{:>8}{:>10}{:>10}",
        "class", "profile", "truth", "mean", "mse"
    );
    for (c, w) in report.weights.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<6}{:<9}{:>8.3}{:>10}{:>10}",
            report.classes[c],
            report.profiles.get(c).map_or("", String::as_str),
            w.truth,
            fmt_opt(w.mean, 3),
            fmt_mse(w.mse)
        );
    }
    let _ = writeln!(s, "\nresponse probabilities: mean (mse)");
    let mut header = format!("{:<10}", "item");
    for c in &report.classes {
        let _ = write!(header, "{c:>18}");
    }
    let _ = writeln!(s, "{header}");
    let mut rows: BTreeMap<(usize, usize), Vec<&ProbCell>> = BTreeMap::new();
    for cell in &report.probs {
        rows.entry((cell.item, cell.category))
            .or_default()
            .push(cell);
    }
    for ((item, cat), cells) in rows {
        let label = if cat == 1 {
            format!("{}", item + 1)
        } else {
            format!("{}:{}", item + 1, cat + 1)
        };
        let mut line = format!("{label:<10}");
        for cell in cells {
            let _ = write!(
                line,
                "{:>18}",
                format!(
                    "{} ({})",
                    fmt_opt(cell.stat.mean, 3),
                    fmt_mse(cell.stat.mse)
                )
            );
        }
        let _ = writeln!(s, "{line}");
    }
    if !report.params.is_empty() {
        let _ = writeln!(s, "\nstructural parameters");
        let _ = writeln!(
            s,
            "{:<16}{:>9}{:>10}{:>10}",
            "parameter", "truth", "mean", "mse"
        );
        for p in &report.params {
            let _ = writeln!(
                s,
                "{:<16}{:>9.3}{:>10}{:>10}",
                p.label,
                p.truth,
                fmt_opt(p.mean, 3),
                fmt_mse(p.mse)
            );
        }
    }
    let _ = writeln!(s, "\nreplicates");
    let _ = writeln!(
        s,
        "{:<6}{:>9}{:>12}{:>12}{:>10}",
        "rep", "retained", "discarded", "max class", "accuracy"
    );
    for r in &report.per_replicate {
        let _ = writeln!(
            s,
            "{:<6}{:>9}{:>12.2e}{:>12.2e}{:>10}",
            r.replicate,
            r.retained,
            r.discarded_mass,
            r.max_discarded,
            fmt_opt(r.partial_info_accuracy, 3)
        );
    }
    for e in &report.excluded {
        let _ = writeln!(s, "excluded replicate {}: {}", e.replicate, e.reason);
    }
    let ranks: Vec<String> = report
        .mean_discarded_by_rank()
        .iter()
        .map(|w| format!("{w:.1e}"))
        .collect();
    if !ranks.is_empty() {
        let _ = writeln!(
            s,
            "\ndiscarded classes, replicate mean by rank: {}",
            ranks.join(" ")
        );
    }
    let _ = writeln!(
        s,
        "\npartial-information accuracy: {}",
        fmt_opt(report.partial_info_accuracy, 3)
    );
    s
}

/// Writes the report in `format` under `dir`; returns the written path.
pub fn emit_report(
    report: &StudyReport,
    format: ReportFormat,
    dir: impl AsRef<Path>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (name, body) = match format {
        ReportFormat::Text => (REPORT_TEXT, render_text(report)),
        ReportFormat::Structured => (REPORT_JSON, report.to_json()?),
    };
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn write_timing(timing: &Timing, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(TIMING_JSON);
    fs::write(&path, serde_json::to_string_pretty(timing)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads a structured report from a file or from `report.json` in a directory.
pub fn read_report(path: impl AsRef<Path>) -> Result<StudyReport> {
    let path = path.as_ref();
    let file = if path.is_dir() {
        path.join(REPORT_JSON)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
    StudyReport::from_json(&text)
}
