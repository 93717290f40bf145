//! Decomposable BIC scoring and the penalized search reward.
//!
//! Each node is scored by a Gaussian regression on its parents. Fits are
//! computed from centered cross-product sums gathered once from the data, so
//! a local score costs `O(k³)` in the parent count regardless of the sample
//! count. Local scores are memoized per `(child, parent set)`.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};

use lru::LruCache;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, ACYCLIC_TOLERANCE};
use crate::numeric::Matrix;

/// Default bound on cached local scores.
pub const DEFAULT_CACHE_CAPACITY: usize = 1 << 20;
/// Largest node count [`exhaustive_best`] will enumerate.
pub const MAX_EXHAUSTIVE_D: usize = 4;
/// Relative ridge added when a design's normal equations are singular.
pub const RIDGE: f64 = 1e-8;
/// Floor on the fitted residual variance.
pub const MIN_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RegressionKind {
    #[default]
    Linear,
    /// Parents plus their squares.
    Quadratic,
}

impl std::str::FromStr for RegressionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            other => Err(Error::Validation(format!("unknown regression kind `{other}`"))),
        }
    }
}

type CacheKey = (u32, u64);

/// BIC scorer over a fixed dataset.
pub struct BicScorer {
    d: usize,
    m: usize,
    kind: RegressionKind,
    /// Centered cross-product sums over feature columns: the `d` variables,
    /// followed by their squares for the quadratic kind.
    cross: Matrix,
    cache: Option<Mutex<LruCache<CacheKey, f64>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
    ridge_fallbacks: AtomicUsize,
}

impl std::fmt::Debug for BicScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BicScorer")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("kind", &self.kind)
            .field("cached", &self.cache.is_some())
            .finish()
    }
}

impl BicScorer {
    pub fn new(ds: &Dataset, kind: RegressionKind) -> Result<Self> {
        Self::with_cache_capacity(ds, kind, DEFAULT_CACHE_CAPACITY)
    }

    /// Capacity 0 disables caching.
    pub fn with_cache_capacity(ds: &Dataset, kind: RegressionKind, capacity: usize) -> Result<Self> {
        let d = ds.n_vars();
        let m = ds.n_samples();
        if d == 0 || d > 64 {
            return Err(Error::usage(format!("scorer supports 1..=64 variables, got {d}")));
        }
        if m < 2 {
            return Err(Error::usage("scorer needs at least two samples"));
        }
        let mut features: Vec<Vec<f64>> = Vec::with_capacity(2 * d);
        for j in 0..d {
            let col = ds
                .column(j)
                .ok_or_else(|| Error::usage("scorer needs numeric (encoded) columns"))?;
            features.push(col.to_vec());
        }
        if kind == RegressionKind::Quadratic {
            for j in 0..d {
                let sq = features[j].iter().map(|v| v * v).collect();
                features.push(sq);
            }
        }
        for f in &mut features {
            let mean = f.iter().sum::<f64>() / m as f64;
            f.iter_mut().for_each(|v| *v -= mean);
        }
        let p = features.len();
        let mut cross = Matrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let s: f64 = features[a].iter().zip(&features[b]).map(|(x, y)| x * y).sum();
                cross.set(a, b, s);
                cross.set(b, a, s);
            }
        }
        let cache = NonZeroUsize::new(capacity).map(|c| Mutex::new(LruCache::new(c)));
        Ok(Self {
            d,
            m,
            kind,
            cross,
            cache,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            ridge_fallbacks: AtomicUsize::new(0),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_samples(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> RegressionKind {
        self.kind
    }

    pub fn cache_hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn cache_misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    /// Number of fits that needed the ridge fallback.
    pub fn ridge_fallbacks(&self) -> usize {
        self.ridge_fallbacks.load(Ordering::Relaxed)
    }

    /// Local score of `child` given `parents`:
    /// `m·(ln(2π σ̂²) + 1) + k·ln m` with `σ̂² = RSS/m` and `k` the design
    /// column count plus two (intercept and variance).
    pub fn local_bic(&self, child: usize, parents: &[usize]) -> Result<f64> {
        if child >= self.d {
            return Err(Error::usage(format!("child {child} out of range")));
        }
        let mut mask = 0u64;
        for &p in parents {
            if p >= self.d {
                return Err(Error::usage(format!("parent {p} out of range")));
            }
            if p == child {
                return Err(Error::usage(format!("node {child} cannot be its own parent")));
            }
            mask |= 1 << p;
        }
        Ok(self.local_bic_mask(child, mask))
    }

    /// [`local_bic`](Self::local_bic) with the parent set as a bitmask.
    pub fn local_bic_mask(&self, child: usize, mask: u64) -> f64 {
        let key = (child as u32, mask);
        if let Some(cache) = &self.cache {
            if let Some(&v) = cache.lock().get(&key) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return v;
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = self.compute_local(child, mask);
        if let Some(cache) = &self.cache {
            cache.lock().put(key, v);
        }
        v
    }

    fn compute_local(&self, child: usize, mask: u64) -> f64 {
        let parents: Vec<usize> = (0..self.d).filter(|&i| mask >> i & 1 == 1).collect();
        let mut design: Vec<usize> = parents.clone();
        if self.kind == RegressionKind::Quadratic {
            design.extend(parents.iter().map(|&p| self.d + p));
        }
        let syy = self.cross.get(child, child);
        let rss = if design.is_empty() {
            syy
        } else {
            let k = design.len();
            let gram = Matrix::from_fn(k, k, |a, b| self.cross.get(design[a], design[b]));
            let rhs: Vec<f64> = design.iter().map(|&a| self.cross.get(a, child)).collect();
            let beta = match solve_spd(&gram, &rhs, 0.0) {
                Some(b) => b,
                None => {
                    self.ridge_fallbacks.fetch_add(1, Ordering::Relaxed);
                    let scale = (0..k).map(|a| gram.get(a, a)).sum::<f64>() / k as f64;
                    let mut ridge = RIDGE * scale.max(1.0);
                    loop {
                        if let Some(b) = solve_spd(&gram, &rhs, ridge) {
                            break b;
                        }
                        ridge *= 10.0;
                    }
                }
            };
            syy - beta.iter().zip(&rhs).map(|(b, r)| b * r).sum::<f64>()
        };
        let m = self.m as f64;
        let variance = (rss / m).max(MIN_VARIANCE);
        let params = (design.len() + 2) as f64;
        m * ((2.0 * std::f64::consts::PI * variance).ln() + 1.0) + params * m.ln()
    }

    /// Sum of local scores over every node's listed parents. Defined for
    /// cyclic graphs too.
    pub fn graph_bic(&self, a: &AdjacencyMatrix) -> Result<f64> {
        if a.d() != self.d {
            return Err(Error::usage(format!("graph has {} nodes, data has {}", a.d(), self.d)));
        }
        Ok((0..self.d).map(|j| self.local_bic_mask(j, a.parent_mask(j))).sum())
    }

    /// Gap between the empty graph's score and the sum of each node's score
    /// given every other node; a scale for the acyclicity penalty caps.
    pub fn range_estimate(&self) -> f64 {
        let all = if self.d == 64 { u64::MAX } else { (1u64 << self.d) - 1 };
        let empty: f64 = (0..self.d).map(|j| self.local_bic_mask(j, 0)).sum();
        let full: f64 = (0..self.d).map(|j| self.local_bic_mask(j, all & !(1 << j))).sum();
        (empty - full).abs()
    }
}

/// Cholesky solve of `(A + ridge·I) x = b`; `None` when not positive definite.
fn solve_spd(a: &Matrix, b: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j) + if i == j { ridge } else { 0.0 };
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                // Near-zero pivots relative to the diagonal mean collinearity.
                if s <= 1e-12 * (a.get(i, i) + ridge).abs() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Some(x)
}

/// Unit of the penalty weights in a [`RewardConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyScale {
    /// Weights are used as given.
    Absolute,
    /// Weights and caps are multiples of [`BicScorer::range_estimate`], which
    /// keeps one setting meaningful across datasets of different size.
    #[default]
    Range,
}

/// Penalty weights and their annealing schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub scale: PenaltyScale,
    /// Current weight of the cyclic-graph indicator.
    pub lambda1: f64,
    /// Current weight of `h(A)`.
    pub lambda2: f64,
    /// Multiplier applied at each update.
    pub growth_factor: f64,
    /// Iterations between updates; 0 disables annealing.
    pub update_interval: usize,
    /// Cap on `lambda1`; `None` means ten times the scorer's range estimate.
    pub lambda1_cap: Option<f64>,
    pub lambda2_cap: f64,
    /// Added to `lambda1` at each update as a fraction of its cap, so a
    /// schedule starting at zero still grows.
    pub lambda1_step_fraction: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            scale: PenaltyScale::Range,
            lambda1: 0.0,
            lambda2: 0.01,
            growth_factor: 2.0,
            update_interval: 500,
            lambda1_cap: None,
            lambda2_cap: 10.0,
            lambda1_step_fraction: 0.05,
        }
    }
}

impl RewardConfig {
    /// Weights used as given, starting at `(lambda1, lambda2)`.
    pub fn absolute(lambda1: f64, lambda2: f64) -> Self {
        Self {
            scale: PenaltyScale::Absolute,
            lambda1,
            lambda2,
            lambda2_cap: lambda2.max(100.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return bad("lambda1 and lambda2 must be non-negative");
        }
        if !(self.growth_factor >= 1.0) {
            return bad("growth factor must be ≥ 1");
        }
        if let Some(cap) = self.lambda1_cap {
            if !(cap >= self.lambda1) {
                return bad("lambda1 cap must be ≥ lambda1");
            }
        }
        if !(self.lambda2_cap >= self.lambda2) {
            return bad("lambda2 cap must be ≥ lambda2");
        }
        if !(0.0..=1.0).contains(&self.lambda1_step_fraction) {
            return bad("lambda1 step fraction must lie in [0, 1]");
        }
        Ok(())
    }

    /// Absolute-scale copy for `scorer` with every cap filled in.
    pub fn resolved(&self, scorer: &BicScorer) -> Self {
        let range = scorer.range_estimate();
        let unit = match self.scale {
            PenaltyScale::Absolute => 1.0,
            PenaltyScale::Range => range,
        };
        let lambda1 = self.lambda1 * unit;
        Self {
            scale: PenaltyScale::Absolute,
            lambda1,
            lambda2: self.lambda2 * unit,
            lambda1_cap: Some(self.lambda1_cap.map_or((10.0 * range).max(lambda1), |c| c * unit)),
            lambda2_cap: self.lambda2_cap * unit,
            ..self.clone()
        }
    }

    /// Applies the schedule after `iteration` (1-based) completed iterations.
    /// Returns true when the weights changed.
    pub fn anneal(&mut self, iteration: usize) -> bool {
        if self.update_interval == 0 || iteration == 0 || iteration % self.update_interval != 0 {
            return false;
        }
        let before = (self.lambda1, self.lambda2);
        let cap1 = self.lambda1_cap.unwrap_or(f64::INFINITY);
        let step = if cap1.is_finite() { cap1 * self.lambda1_step_fraction } else { 0.0 };
        self.lambda1 = (self.lambda1 * self.growth_factor + step).min(cap1);
        self.lambda2 = (self.lambda2 * self.growth_factor).min(self.lambda2_cap);
        before != (self.lambda1, self.lambda2)
    }
}

/// Reward and its parts, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub reward: f64,
    pub bic: f64,
    /// `λ1·I(G ∉ DAGs)`
    pub indicator_term: f64,
    /// `λ2·h(A)`
    pub h_term: f64,
    pub h: f64,
    pub is_dag: bool,
}

/// `−[BIC + λ1·I(cyclic) + λ2·h(A)]`. Range-scaled weights are converted with
/// the scorer's range estimate.
pub fn reward(scorer: &BicScorer, cfg: &RewardConfig, a: &AdjacencyMatrix) -> Result<RewardBreakdown> {
    let bic = scorer.graph_bic(a)?;
    let is_dag = a.is_dag();
    let unit = match cfg.scale {
        PenaltyScale::Absolute => 1.0,
        PenaltyScale::Range => scorer.range_estimate(),
    };
    let h = if is_dag { 0.0 } else { a.acyclicity_penalty() };
    let indicator_term = if is_dag { 0.0 } else { unit * cfg.lambda1 };
    let h_term = unit * cfg.lambda2 * h;
    Ok(RewardBreakdown {
        reward: -(bic + indicator_term + h_term),
        bic,
        indicator_term,
        h_term,
        h,
        is_dag: is_dag && h <= ACYCLIC_TOLERANCE,
    })
}

/// Every DAG on `d` nodes, in ascending order of the off-diagonal bitmask.
pub fn enumerate_dags(d: usize) -> Result<Vec<AdjacencyMatrix>> {
    if d > MAX_EXHAUSTIVE_D {
        return Err(Error::usage(format!(
            "exhaustive enumeration supports d ≤ {MAX_EXHAUSTIVE_D}, got {d}"
        )));
    }
    let slots: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << slots.len()) {
        let edges = slots.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e);
        let a = AdjacencyMatrix::from_edges(d, edges)?;
        if a.is_dag() {
            out.push(a);
        }
    }
    Ok(out)
}

/// Minimum-BIC DAG by enumeration; ties keep the earliest enumerated graph.
pub fn exhaustive_best(scorer: &BicScorer) -> Result<(AdjacencyMatrix, f64)> {
    let mut best: Option<(AdjacencyMatrix, f64)> = None;
    for a in enumerate_dags(scorer.d())? {
        let s = scorer.graph_bic(&a)?;
        if best.as_ref().map_or(true, |(_, b)| s < *b) {
            best = Some((a, s));
        }
    }
    best.ok_or_else(|| Error::usage("no graphs to enumerate"))
}

/// Greedy hill climbing from the DAG `start`: repeatedly applies the single
/// edge addition, deletion or reversal that lowers the BIC most while keeping
/// the graph acyclic. Ties keep the first move in `(from, to)` order.
pub fn hill_climb(scorer: &BicScorer, start: &AdjacencyMatrix) -> Result<(AdjacencyMatrix, f64)> {
    let d = scorer.d();
    if start.d() != d {
        return Err(Error::usage(format!("graph has {} nodes, data has {d}", start.d())));
    }
    if !start.is_dag() {
        return Err(Error::usage("hill climbing must start from a DAG"));
    }
    let mut a = start.clone();
    let mut local: Vec<f64> = (0..d).map(|j| scorer.local_bic_mask(j, a.parent_mask(j))).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..d {
            for j in (0..d).filter(|&j| j != i) {
                let delta = if a.has_edge(i, j) {
                    let removed = a.parent_mask(j) & !(1 << i);
                    let drop = scorer.local_bic_mask(j, removed) - local[j];
                    let mut rev = a.clone();
                    rev.remove(i, j);
                    rev.insert(j, i)?;
                    let flip = if rev.is_dag() {
                        drop + scorer.local_bic_mask(i, a.parent_mask(i) | (1 << j)) - local[i]
                    } else {
                        f64::INFINITY
                    };
                    drop.min(flip)
                } else if !a.has_edge(j, i) {
                    let mut add = a.clone();
                    add.insert(i, j)?;
                    if add.is_dag() {
                        scorer.local_bic_mask(j, a.parent_mask(j) | (1 << i)) - local[j]
                    } else {
                        f64::INFINITY
                    }
                } else {
                    f64::INFINITY
                };
                if delta < -1e-9 && best.map_or(true, |(b, _, _)| delta < b) {
                    best = Some((delta, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        if a.has_edge(i, j) {
            let removed = a.parent_mask(j) & !(1 << i);
            let drop = scorer.local_bic_mask(j, removed) - local[j];
            a.remove(i, j);
            let mut rev = a.clone();
            rev.insert(j, i)?;
            if rev.is_dag() {
                let flip = drop + scorer.local_bic_mask(i, a.parent_mask(i) | (1 << j)) - local[i];
                if flip < drop {
                    a = rev;
                }
            }
        } else {
            a.insert(i, j)?;
        }
        local[i] = scorer.local_bic_mask(i, a.parent_mask(i));
        local[j] = scorer.local_bic_mask(j, a.parent_mask(j));
    }
    Ok((a, local.iter().sum()))
}
