//! Infinite latent class model with a stick-breaking prior, fitted by a
//! slice Gibbs sampler.
//!
//! Model: `V_l ~ Beta(1, beta)`, `pi_a = V_a prod_{l<a} (1 - V_l)`, class
//! response distributions `p_{ja} ~ Dirichlet(1)`, and optionally
//! `beta ~ Gamma(1, 1)`. Each sweep updates, in order:
//!
//! 1. slices `u_i ~ U(0, pi_{z_i})`;
//! 2. `p_{ja} ~ Dirichlet(1 + counts)` for occupied-range classes;
//! 3. sticks `V_a` from `Beta(1, beta)` truncated so every slice condition
//!    still holds; sticks past the occupied range are dropped;
//! 4. new sticks are drawn from the prior until the leftover mass falls below
//!    `min_i u_i`, then `z_i` is drawn over `{a : pi_a > u_i}` with weights
//!    `prod_j p_{ja}(y_ij)`;
//! 5. `beta ~ Gamma(1 + M, 1 - sum_{a<M} log(1 - V_a))` over the `M`
//!    occupied-range sticks, when the hyperprior is enabled.
//!
//! In step 3, an empty lower (upper) index set makes the bound 0 (1).
//!
//! [`StickUpdate::Marginal`] (the default) replaces steps 1 and 3 with a
//! blocked draw of the sticks given the assignments alone, followed by fresh
//! slices. Both leave the same posterior invariant; the truncated form moves
//! each weight by about `1 / n_a` per sweep and leaves split classes alive
//! for thousands of sweeps.
//!
//! Each sweep starts with [`SamplerConfig::split_merge`] split-merge
//! proposals (see [`split_merge`]), which let duplicated classes merge.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::distributions::Open01;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::cluster::kmeans;
use crate::error::{Error, Result};
use crate::models::ResponseProbTable;
use crate::simulate::{stream_rng, Dataset};

mod split_merge;
pub use split_merge::split_merge;

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// RNG stream under `seed`; replicate studies use the replicate index.
    pub stream: u64,
    /// Most sticks that may be materialized at once.
    pub max_sticks: usize,
    pub beta_hyperprior: bool,
    pub beta_init: f64,
    pub stick_init: StickInit,
    pub stick_update: StickUpdate,
    /// Split-merge proposals per sweep.
    pub split_merge: usize,
    /// Report progress on stderr every 100 iterations.
    pub progress: bool,
}

/// How [`init_state`] sets the initial sticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StickInit {
    /// Independent `Beta(1, beta)` draws.
    Prior,
    /// Weights `n_a / (n + beta)` of the initial clusters. The truncated
    /// stick update moves a class weight by roughly `1 / n_a` per sweep, so
    /// starting from prior draws leaves large classes stuck at arbitrary
    /// weights for many thousands of sweeps.
    Counts,
}

/// How step 3 updates the sticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StickUpdate {
    /// `Beta(1, beta)` truncated by the current slices.
    Truncated,
    /// `Beta(1 + n_a, beta + sum_{b>a} n_b)` with the slices integrated out,
    /// followed by fresh slices.
    Marginal,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 20000,
            burn_in: 5000,
            thin: 5,
            seed: 0,
            stream: 0,
            max_sticks: 512,
            beta_hyperprior: true,
            beta_init: 1.0,
            stick_init: StickInit::Counts,
            stick_update: StickUpdate::Marginal,
            split_merge: 2,
            progress: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Domain(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::Domain("thinning must be at least 1".into()));
        }
        if self.max_sticks == 0 {
            return Err(Error::Domain("stick cap must be at least 1".into()));
        }
        if !(self.beta_init > 0.0 && self.beta_init.is_finite()) {
            return Err(Error::Domain(
                "initial concentration must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Responses recoded as flat offsets into a class's concatenated
/// per-item distributions.
#[derive(Debug, Clone)]
pub struct EncodedData {
    categories: Vec<usize>,
    offsets: Vec<usize>,
    width: usize,
    n: usize,
    cells: Vec<u32>,
    /// `ln t` for `t = 0..=n + max categories`.
    ln_int: Vec<f64>,
}

impl EncodedData {
    pub fn new(data: &Dataset) -> Self {
        let categories = data.categories().to_vec();
        let mut offsets = Vec::with_capacity(categories.len());
        let mut width = 0;
        for &k in &categories {
            offsets.push(width);
            width += k;
        }
        let n = data.n_rows();
        let mut cells = Vec::with_capacity(n * categories.len());
        for i in 0..n {
            for (&y, &o) in data.row(i).iter().zip(&offsets) {
                cells.push((o + y as usize - 1) as u32);
            }
        }
        let top = n + categories.iter().max().copied().unwrap_or(0);
        let ln_int = (0..=top).map(|t| (t as f64).ln()).collect();
        Self {
            categories,
            offsets,
            width,
            n,
            cells,
            ln_int,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_items(&self) -> usize {
        self.categories.len()
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    /// Length of one class's concatenated distributions.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    fn row(&self, i: usize) -> &[u32] {
        let j = self.categories.len();
        &self.cells[i * j..(i + 1) * j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    /// Materialized sticks `V_0..V_{L-1}`.
    pub sticks: Vec<f64>,
    /// `pi_a` implied by `sticks`.
    pub weights: Vec<f64>,
    /// Per class, the item distributions concatenated in item order.
    pub probs: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub slices: Vec<f64>,
    pub beta: f64,
}

fn weights_from_sticks(sticks: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    sticks
        .iter()
        .map(|&v| {
            let w = v * rest;
            rest *= 1.0 - v;
            w
        })
        .collect()
}

impl SamplerState {
    pub fn n_classes(&self) -> usize {
        self.sticks.len()
    }

    fn refresh_weights(&mut self) {
        self.weights = weights_from_sticks(&self.sticks);
    }

    /// Mass not covered by materialized sticks.
    pub fn leftover(&self) -> f64 {
        self.sticks.iter().map(|v| 1.0 - v).product()
    }

    /// One past the largest assigned class (at least 1).
    pub fn occupied(&self) -> usize {
        self.assignments.iter().max().map_or(1, |m| m + 1)
    }

    pub fn check_invariants(&self, data: &EncodedData) -> std::result::Result<(), String> {
        if self.weights.len() != self.sticks.len() || self.probs.len() != self.sticks.len() {
            return Err("stick, weight and probability counts differ".into());
        }
        for (a, &v) in self.sticks.iter().enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("stick {a} = {v} outside (0, 1)"));
            }
        }
        let expect = weights_from_sticks(&self.sticks);
        if expect != self.weights {
            return Err("weights differ from stick-breaking product".into());
        }
        for (i, (&z, &u)) in self.assignments.iter().zip(&self.slices).enumerate() {
            if z >= self.sticks.len() {
                return Err(format!(
                    "respondent {i} assigned to unmaterialized class {z}"
                ));
            }
            if !(u > 0.0 && u < self.weights[z]) {
                return Err(format!(
                    "slice {u} of respondent {i} not in (0, pi_{z} = {})",
                    self.weights[z]
                ));
            }
        }
        for (a, p) in self.probs.iter().enumerate() {
            if p.len() != data.width {
                return Err(format!(
                    "class {a} has {} probabilities, expected {}",
                    p.len(),
                    data.width
                ));
            }
            for (j, (&o, &k)) in data.offsets.iter().zip(&data.categories).enumerate() {
                let d = &p[o..o + k];
                let s: f64 = d.iter().sum();
                if d.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return Err(format!("class {a} item {j} is not a distribution"));
                }
            }
        }
        Ok(())
    }
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(Open01)
}

/// Draw from `Beta(1, beta)` truncated to `(lo, hi)` by inverting
/// `F(v) = 1 - (1 - v)^beta`.
pub fn truncated_beta1<R: Rng + ?Sized>(beta: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    // Work with the survival function S(v) = (1 - v)^beta to keep precision near 0.
    let s_lo = (beta * (-lo).ln_1p()).exp();
    let s_hi = if hi >= 1.0 {
        0.0
    } else {
        (beta * (-hi).ln_1p()).exp()
    };
    let s = s_hi + (s_lo - s_hi) * open01(rng);
    // A small beta can round the draw to exactly 1, which empties every later class.
    (-(s.ln() / beta).exp_m1()).min(STICK_MAX)
}

/// Largest stick value below 1.
const STICK_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], out: &mut [f64], rng: &mut R) {
    let mut total = 0.0;
    for (o, &a) in out.iter_mut().zip(alpha) {
        *o = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
        total += *o;
    }
    if total > 0.0 && total.is_finite() {
        for o in out.iter_mut() {
            *o /= total;
        }
    } else {
        out.fill(1.0 / out.len() as f64);
    }
}

fn prior_probs<R: Rng + ?Sized>(data: &EncodedData, rng: &mut R) -> Vec<f64> {
    let mut p = vec![0.0; data.width];
    for (&o, &k) in data.offsets.iter().zip(&data.categories) {
        dirichlet(&vec![1.0; k], &mut p[o..o + k], rng);
    }
    p
}

/// Dirichlet posterior parameters `1 + counts` for classes `0..m` given the
/// current assignments.
pub fn posterior_dirichlet(state: &SamplerState, data: &EncodedData, m: usize) -> Vec<Vec<f64>> {
    let mut params = vec![vec![1.0; data.width]; m];
    for (i, &z) in state.assignments.iter().enumerate() {
        if z < m {
            for &c in data.row(i) {
                params[z][c as usize] += 1.0;
            }
        }
    }
    params
}

/// Step 1.
pub fn sample_slices<R: Rng + ?Sized>(state: &mut SamplerState, rng: &mut R) {
    for (u, &z) in state.slices.iter_mut().zip(&state.assignments) {
        *u = state.weights[z] * open01(rng);
    }
}

/// Step 2, for classes in the occupied range.
pub fn sample_probs<R: Rng + ?Sized>(state: &mut SamplerState, data: &EncodedData, rng: &mut R) {
    let m = state.occupied().min(state.n_classes());
    let params = posterior_dirichlet(state, data, m);
    for (a, alpha) in params.iter().enumerate() {
        for (&o, &k) in data.offsets.iter().zip(&data.categories) {
            dirichlet(&alpha[o..o + k], &mut state.probs[a][o..o + k], rng);
        }
    }
}

/// Step 3: truncated stick updates over the occupied range, then drop the rest.
pub fn sample_sticks<R: Rng + ?Sized>(state: &mut SamplerState, rng: &mut R) {
    let m = if state.assignments.is_empty() {
        0
    } else {
        state.occupied()
    };
    let mut max_slice = vec![0.0f64; m];
    for (&z, &u) in state.assignments.iter().zip(&state.slices) {
        max_slice[z] = max_slice[z].max(u);
    }
    for a in 0..m {
        let before: f64 = state.sticks[..a].iter().map(|v| 1.0 - v).product();
        let lo = max_slice[a] / before;
        // pi_c / (1 - V_a) is the weight of class c > a with V_a's factor removed.
        let ratio = (a + 1..m)
            .filter(|&c| max_slice[c] > 0.0)
            .map(|c| max_slice[c] / state.weights[c])
            .fold(0.0, f64::max);
        let hi = 1.0 - (1.0 - state.sticks[a]) * ratio;
        let current = state.sticks[a];
        let mut v = current;
        for _ in 0..64 {
            let cand = truncated_beta1(state.beta, lo, hi, rng);
            if cand > lo && cand < hi && cand > 0.0 && cand < 1.0 {
                v = cand;
                break;
            }
        }
        state.sticks[a] = v;
        state.refresh_weights();
        // Rounding in the recomputed products can break a slice by one ulp.
        if !slices_hold(state, m) {
            state.sticks[a] = current;
            state.refresh_weights();
        }
    }
    state.sticks.truncate(m);
    state.probs.truncate(m);
    state.weights.truncate(m);
}

/// Step 3 with the slices integrated out: `V_a ~ Beta(1 + n_a, beta + sum_{b>a} n_b)`
/// for occupied-range sticks; later sticks are dropped.
pub fn sample_sticks_marginal<R: Rng + ?Sized>(state: &mut SamplerState, rng: &mut R) {
    let m = state.occupied().min(state.n_classes());
    let mut counts = vec![0usize; m];
    for &z in &state.assignments {
        counts[z] += 1;
    }
    let mut rest = state.assignments.len();
    for a in 0..m {
        rest -= counts[a];
        let x = Gamma::new(1.0 + counts[a] as f64, 1.0)
            .expect("positive shape")
            .sample(rng);
        let y = Gamma::new(state.beta + rest as f64, 1.0)
            .expect("positive shape")
            .sample(rng);
        state.sticks[a] = (x / (x + y)).clamp(f64::MIN_POSITIVE, STICK_MAX);
    }
    state.sticks.truncate(m);
    state.probs.truncate(m);
    state.refresh_weights();
}

fn slices_hold(state: &SamplerState, m: usize) -> bool {
    let _ = m;
    state
        .assignments
        .iter()
        .zip(&state.slices)
        .all(|(&z, &u)| u < state.weights[z])
}

/// Step 4: extend sticks from the prior, then reassign classes.
pub fn sample_assignments<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &EncodedData,
    max_sticks: usize,
    rng: &mut R,
) -> std::result::Result<(), String> {
    let min_slice = state.slices.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut leftover = state.leftover();
    while state.sticks.is_empty() || leftover >= min_slice {
        if state.sticks.len() >= max_sticks {
            return Err(format!(
                "stick cap {max_sticks} reached with leftover mass {leftover:e} >= min slice {min_slice:e}"
            ));
        }
        let v = truncated_beta1(state.beta, 0.0, 1.0, rng);
        state.sticks.push(v);
        state.weights.push(v * leftover);
        state.probs.push(prior_probs(data, rng));
        leftover *= 1.0 - v;
    }
    let logp: Vec<Vec<f64>> = state
        .probs
        .iter()
        .map(|p| p.iter().map(|&x| x.max(LOG_FLOOR).ln()).collect())
        .collect();
    let mut cand = Vec::with_capacity(state.sticks.len());
    let mut logw = Vec::with_capacity(state.sticks.len());
    for i in 0..data.n {
        let u = state.slices[i];
        let row = data.row(i);
        cand.clear();
        logw.clear();
        for (a, lp) in logp.iter().enumerate() {
            if state.weights[a] > u {
                cand.push(a);
                logw.push(row.iter().map(|&c| lp[c as usize]).sum::<f64>());
            }
        }
        if cand.is_empty() {
            return Err(format!("respondent {i} has an empty slice set (u = {u:e})"));
        }
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for w in logw.iter_mut() {
            *w = (*w - top).exp();
            total += *w;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = cand[cand.len() - 1];
        for (&a, &w) in cand.iter().zip(&logw) {
            if target < w {
                pick = a;
                break;
            }
            target -= w;
        }
        state.assignments[i] = pick;
    }
    Ok(())
}

/// Step 5.
pub fn sample_beta<R: Rng + ?Sized>(state: &mut SamplerState, rng: &mut R) {
    let m = state.occupied().min(state.n_classes());
    let log_rest: f64 = state.sticks[..m]
        .iter()
        .map(|v| (-v.min(STICK_MAX)).ln_1p())
        .sum();
    let rate = 1.0 - log_rest;
    state.beta = Gamma::new(1.0 + m as f64, 1.0 / rate)
        .expect("positive gamma")
        .sample(rng);
}

/// One full sweep. `iteration` only labels faults.
pub fn gibbs_step<R: Rng + ?Sized>(
    state: &mut SamplerState,
    data: &EncodedData,
    config: &SamplerConfig,
    iteration: usize,
    rng: &mut R,
) -> Result<()> {
    let mut moved = false;
    for _ in 0..config.split_merge {
        moved |= split_merge(state, data, config.max_sticks, rng);
    }
    match config.stick_update {
        StickUpdate::Truncated => {
            if moved {
                // the truncated update needs sticks and slices consistent with the new assignments
                sample_probs(state, data, rng);
                sample_sticks_marginal(state, rng);
            }
            sample_slices(state, rng);
            sample_probs(state, data, rng);
            sample_sticks(state, rng);
        }
        StickUpdate::Marginal => {
            sample_probs(state, data, rng);
            sample_sticks_marginal(state, rng);
            sample_slices(state, rng);
        }
    }
    sample_assignments(state, data, config.max_sticks, rng).map_err(|message| {
        Error::SamplerFault {
            iteration,
            message: format!("{message}; {}", dump(state)),
        }
    })?;
    if config.beta_hyperprior {
        sample_beta(state, rng);
    }
    debug_assert!(
        state.check_invariants(data).is_ok(),
        "iteration {iteration}: {:?}",
        state.check_invariants(data)
    );
    Ok(())
}

fn dump(state: &SamplerState) -> String {
    format!(
        "state: {} sticks, beta {:.4}, leftover {:e}, min slice {:e}",
        state.n_classes(),
        state.beta,
        state.leftover(),
        state.slices.iter().cloned().fold(f64::INFINITY, f64::min)
    )
}

/// Initial state: k-means of one-hot responses into `max(1, ceil(log2 n))`
/// groups relabeled by decreasing size, sticks per [`StickInit`], `p` from
/// its conditional posterior, then slices.
pub fn init_state<R: Rng + ?Sized>(
    data: &EncodedData,
    config: &SamplerConfig,
    rng: &mut R,
) -> SamplerState {
    let n = data.n;
    let mut assignments = vec![0usize; n];
    if n > 1 {
        let k = (n as f64).log2().ceil().max(1.0) as usize;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut v = vec![0.0; data.width];
                for &c in data.row(i) {
                    v[c as usize] = 1.0;
                }
                v
            })
            .collect();
        let km = kmeans(&points, k, 1, rng);
        let mut sizes: Vec<(usize, usize)> = vec![(0, 0); km.centers.len()];
        for (c, s) in sizes.iter_mut().enumerate() {
            s.1 = c;
        }
        for &l in &km.labels {
            sizes[l].0 += 1;
        }
        sizes.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut relabel = vec![0usize; km.centers.len()];
        for (new, &(_, old)) in sizes.iter().enumerate() {
            relabel[old] = new;
        }
        for (z, &l) in assignments.iter_mut().zip(&km.labels) {
            *z = relabel[l];
        }
    }
    let m = assignments.iter().max().map_or(1, |x| x + 1);
    let sticks: Vec<f64> = match config.stick_init {
        StickInit::Prior => (0..m)
            .map(|_| truncated_beta1(config.beta_init, 0.0, 1.0, rng))
            .collect(),
        StickInit::Counts => {
            let mut counts = vec![0usize; m];
            for &z in &assignments {
                counts[z] += 1;
            }
            let total = n as f64 + config.beta_init;
            let mut rest = 1.0;
            counts
                .iter()
                .map(|&c| {
                    let pi = (c as f64).max(0.5) / total;
                    let v = (pi / rest).clamp(1e-12, 1.0 - 1e-12);
                    rest *= 1.0 - v;
                    v
                })
                .collect()
        }
    };
    let mut state = SamplerState {
        weights: weights_from_sticks(&sticks),
        sticks,
        probs: vec![vec![0.0; data.width]; m],
        assignments,
        slices: vec![0.0; n],
        beta: config.beta_init,
    };
    sample_probs(&mut state, data, rng);
    sample_slices(&mut state, rng);
    state
}

/// One retained sweep: classes `0..n_classes` of the occupied range.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub beta: f64,
    pub weights: Vec<f64>,
    /// Class-major: class `a`'s concatenated item distributions.
    pub probs: Vec<f64>,
}

impl Draw {
    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }
}

/// Retained draws of `(p, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    categories: Vec<usize>,
    offsets: Vec<usize>,
    width: usize,
    pub n_obs: usize,
    pub draws: Vec<Draw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawsFormat {
    Csv,
    Binary,
}

impl std::str::FromStr for DrawsFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DrawsFormat::Csv),
            "binary" | "bin" => Ok(DrawsFormat::Binary),
            other => Err(Error::Domain(format!(
                "unknown draws format '{other}' (csv|binary)"
            ))),
        }
    }
}

impl DrawsFormat {
    /// `.csv` paths are CSV, anything else binary.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DrawsFormat::Csv,
            _ => DrawsFormat::Binary,
        }
    }
}

const BINARY_MAGIC: &[u8; 8] = b"DCMDRAW1";

impl PosteriorDraws {
    pub fn new(categories: Vec<usize>, n_obs: usize) -> Self {
        let mut offsets = Vec::new();
        let mut width = 0;
        for &k in &categories {
            offsets.push(width);
            width += k;
        }
        Self {
            categories,
            offsets,
            width,
            n_obs,
            draws: Vec::new(),
        }
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn n_items(&self) -> usize {
        self.categories.len()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Distribution of `item` for `class` in draw `d`.
    pub fn dist(&self, d: usize, class: usize, item: usize) -> &[f64] {
        let start = class * self.width + self.offsets[item];
        &self.draws[d].probs[start..start + self.categories[item]]
    }

    /// Draw `d` as a response table over its classes.
    pub fn table(&self, d: usize) -> Result<ResponseProbTable> {
        let m = self.draws[d].n_classes();
        let probs = (0..self.n_items())
            .map(|j| (0..m).map(|a| self.dist(d, a, j).to_vec()).collect())
            .collect();
        ResponseProbTable::new(probs)
    }

    pub fn push(&mut self, draw: Draw) -> Result<()> {
        if draw.probs.len() != draw.weights.len() * self.width {
            return Err(Error::Domain(
                "draw size does not match the item layout".into(),
            ));
        }
        self.draws.push(draw);
        Ok(())
    }

    /// Header `iteration,beta,class,weight,item1:1,...`; one row per class per draw.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# n_obs={}\niteration,beta,class,weight", self.n_obs);
        for (j, &k) in self.categories.iter().enumerate() {
            for y in 1..=k {
                out.push_str(&format!(",item{}:{y}", j + 1));
            }
        }
        out.push('\n');
        for d in &self.draws {
            for a in 0..d.n_classes() {
                out.push_str(&format!(
                    "{},{:e},{},{:e}",
                    d.iteration,
                    d.beta,
                    a + 1,
                    d.weights[a]
                ));
                for x in &d.probs[a * self.width..(a + 1) * self.width] {
                    out.push_str(&format!(",{x:e}"));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn parse_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 1, "empty file"))?;
        let n_obs = first
            .strip_prefix("# n_obs=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(source_name, 1, "expected '# n_obs=<int>'"))?;
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 2, "missing header"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 4 || cols[..4] != ["iteration", "beta", "class", "weight"] {
            return Err(Error::parse(source_name, 2, "unexpected header"));
        }
        let mut categories: Vec<usize> = Vec::new();
        for c in &cols[4..] {
            let (item, y) = c
                .strip_prefix("item")
                .and_then(|s| s.split_once(':'))
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or_else(|| Error::parse(source_name, 2, format!("bad column '{c}'")))?;
            if item == categories.len() + 1 && y == 1 {
                categories.push(1);
            } else if item == categories.len() && y == categories[item - 1] + 1 {
                categories[item - 1] += 1;
            } else {
                return Err(Error::parse(
                    source_name,
                    2,
                    format!("column '{c}' out of order"),
                ));
            }
        }
        let mut out = Self::new(categories, n_obs);
        let mut current: Option<Draw> = None;
        for (ln, line) in lines {
            let line_no = ln + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("{} fields, expected {}", fields.len(), cols.len()),
                ));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(source_name, line_no, format!("'{s}': {e}")))
            };
            let iteration: usize = fields[0]
                .parse()
                .map_err(|e| Error::parse(source_name, line_no, format!("iteration: {e}")))?;
            let class: usize = fields[2]
                .parse()
                .map_err(|e| Error::parse(source_name, line_no, format!("class: {e}")))?;
            let beta = num(fields[1])?;
            let weight = num(fields[3])?;
            let probs = fields[4..]
                .iter()
                .map(|s| num(s))
                .collect::<Result<Vec<f64>>>()?;
            if class == 1 {
                if let Some(d) = current.take() {
                    out.push(d)?;
                }
                current = Some(Draw {
                    iteration,
                    beta,
                    weights: Vec::new(),
                    probs: Vec::new(),
                });
            }
            let d = current
                .as_mut()
                .filter(|d| d.iteration == iteration && d.weights.len() + 1 == class)
                .ok_or_else(|| {
                    Error::parse(
                        source_name,
                        line_no,
                        "classes must run 1, 2, ... within a draw",
                    )
                })?;
            d.weights.push(weight);
            d.probs.extend(probs);
        }
        if let Some(d) = current {
            out.push(d)?;
        }
        Ok(out)
    }

    /// Little-endian layout: magic `DCMDRAW1`; `u32` item count; `u32`
    /// category count per item; `u64` n_obs; `u64` draw count; then per draw
    /// `u64` iteration, `f64` beta, `u32` class count `m`, `m` weights and
    /// `m * sum(k_j)` probabilities (class-major, items in order).
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.categories.len() as u32).to_le_bytes());
        for &k in &self.categories {
            out.extend_from_slice(&(k as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.n_obs as u64).to_le_bytes());
        out.extend_from_slice(&(self.draws.len() as u64).to_le_bytes());
        for d in &self.draws {
            out.extend_from_slice(&(d.iteration as u64).to_le_bytes());
            out.extend_from_slice(&d.beta.to_le_bytes());
            out.extend_from_slice(&(d.n_classes() as u32).to_le_bytes());
            for x in d.weights.iter().chain(&d.probs) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8], source_name: &str) -> Result<Self> {
        let mut r = ByteReader {
            bytes,
            pos: 0,
            source_name,
        };
        if r.take(8)? != BINARY_MAGIC {
            return Err(Error::parse(source_name, 0, "not a draws file"));
        }
        let j = r.u32()? as usize;
        let categories = (0..j)
            .map(|_| Ok(r.u32()? as usize))
            .collect::<Result<Vec<_>>>()?;
        let n_obs = r.u64()? as usize;
        let n_draws = r.u64()? as usize;
        let mut out = Self::new(categories, n_obs);
        for _ in 0..n_draws {
            let iteration = r.u64()? as usize;
            let beta = f64::from_bits(r.u64()?);
            let m = r.u32()? as usize;
            let mut vals = (0..m * (1 + out.width))
                .map(|_| Ok(f64::from_bits(r.u64()?)))
                .collect::<Result<Vec<f64>>>()?;
            let probs = vals.split_off(m);
            out.push(Draw {
                iteration,
                beta,
                weights: vals,
                probs,
            })?;
        }
        if r.pos != bytes.len() {
            return Err(Error::parse(
                source_name,
                0,
                "trailing bytes after last draw",
            ));
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>, format: DrawsFormat) -> Result<()> {
        let path = path.as_ref();
        let bytes = match format {
            DrawsFormat::Csv => self.to_csv().into_bytes(),
            DrawsFormat::Binary => self.to_binary(),
        };
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Reads either format, detected from the file's first bytes.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(&bytes, &name)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::parse(&name, 0, "neither binary draws nor UTF-8 CSV"))?;
            Self::parse_csv(&text, &name)
        }
    }
}

/// Runs burn-in, then keeps every `thin`-th sweep. Deterministic given
/// `config.seed` and `config.stream`.
pub fn run_chain(data: &Dataset, config: &SamplerConfig) -> Result<PosteriorDraws> {
    run_chain_with(data, config, &mut stream_rng(config.seed, config.stream))
}

pub fn run_chain_with(
    data: &Dataset,
    config: &SamplerConfig,
    rng: &mut ChaCha20Rng,
) -> Result<PosteriorDraws> {
    config.validate()?;
    let enc = EncodedData::new(data);
    let mut state = init_state(&enc, config, rng);
    let mut draws = PosteriorDraws::new(enc.categories.clone(), enc.n);
    let stderr = std::io::stderr();
    for it in 1..=config.iterations {
        gibbs_step(&mut state, &enc, config, it, rng)?;
        if it > config.burn_in && (it - config.burn_in).is_multiple_of(config.thin) {
            let m = state.occupied().min(state.n_classes());
            draws.push(Draw {
                iteration: it,
                beta: state.beta,
                weights: state.weights[..m].to_vec(),
                probs: state.probs[..m].concat(),
            })?;
        }
        if config.progress && it % 100 == 0 {
            let _ = writeln!(
                stderr.lock(),
                "iteration {it}/{}: {} occupied classes, beta {:.3}",
                config.iterations,
                state.occupied(),
                state.beta
            );
        }
    }
    Ok(draws)
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source_name: &'a str,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| {
            Error::parse(
                self.source_name,
                0,
                format!("truncated at byte {}", self.pos),
            )
        })?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
