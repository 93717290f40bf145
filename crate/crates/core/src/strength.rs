//! Inverse-information-entropy (IIE) edge strengths.
//!
//! Each variable's differential entropy is estimated from the log-spacings of
//! its sorted sample; the strength of an edge is the reciprocal of the
//! absolute entropy difference of its endpoints on standardized data, reported
//! on a natural-log scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalGraph;

/// Floor applied to zero spacings between tied sample values.
pub const SPACING_FLOOR: f64 = 1e-12;
/// Floor on `|ΔS|`; caps the raw strength at `1 / MIN_ENTROPY_GAP`.
pub const MIN_ENTROPY_GAP: f64 = 1e-6;
/// Largest raw strength, reached when two entropies coincide.
pub const STRENGTH_CAP: f64 = 1.0 / MIN_ENTROPY_GAP;
/// Default log-strength below which edges are pruned.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.1;

/// Digamma function `ψ(x)` for `x > 0`.
///
/// Shifts the argument up to at least 6 with `ψ(x) = ψ(x+1) − 1/x`, then uses
/// the asymptotic expansion through the `x⁻¹⁴` term.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma is defined for finite x > 0, got {x}")));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli terms B_2k / (2k x^2k), Horner form in 1/x².
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(shift + x.ln() - 0.5 / x - series)
}

/// Differential entropy estimate in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    /// Sample count.
    pub n: usize,
    /// Zero spacings replaced by [`SPACING_FLOOR`].
    pub tie_corrections: usize,
}

impl EntropyEstimate {
    /// True when every spacing was a tie (a constant sample).
    pub fn fully_tied(&self) -> bool {
        self.tie_corrections + 1 == self.n
    }
}

/// Spacing estimator
/// `Ŝ = ψ(n) − ψ(1) + 1/(n−1) · Σ ln|x₍ᵢ₊₁₎ − x₍ᵢ₎|` over the sorted sample.
pub fn spacing_entropy(sample: &[f64]) -> Result<EntropyEstimate> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::usage(format!("entropy estimate needs at least 2 samples, got {n}")));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("entropy estimate needs finite samples".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0;
    let mut log_sum = 0.0;
    for w in sorted.windows(2) {
        let gap = (w[1] - w[0]).abs();
        let gap = if gap == 0.0 {
            ties += 1;
            SPACING_FLOOR
        } else {
            gap
        };
        log_sum += gap.ln();
    }
    let value = digamma(n as f64)? - digamma(1.0)? + log_sum / (n - 1) as f64;
    Ok(EntropyEstimate {
        value,
        n,
        tie_corrections: ties,
    })
}

/// A raw IIE strength and the entropies behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IieStrength {
    pub value: f64,
    /// Set when `|ΔS|` hit [`MIN_ENTROPY_GAP`] and the value is capped.
    pub degenerate: bool,
    pub cause_entropy: EntropyEstimate,
    pub effect_entropy: EntropyEstimate,
}

fn strength_from_entropies(cause: EntropyEstimate, effect: EntropyEstimate) -> IieStrength {
    let gap = (effect.value - cause.value).abs();
    let degenerate = gap <= MIN_ENTROPY_GAP;
    IieStrength {
        value: 1.0 / gap.max(MIN_ENTROPY_GAP),
        degenerate,
        cause_entropy: cause,
        effect_entropy: effect,
    }
}

/// `T = 1 / |S(effect) − S(cause)|`, capped at [`STRENGTH_CAP`]. Symmetric in
/// its arguments.
pub fn iie_strength(cause: &[f64], effect: &[f64]) -> Result<IieStrength> {
    Ok(strength_from_entropies(spacing_entropy(cause)?, spacing_entropy(effect)?))
}

fn zscore(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    if std > 0.0 && std.is_finite() {
        x.iter().map(|v| (v - mean) / std).collect()
    } else {
        vec![0.0; x.len()]
    }
}

/// IIE strength between columns `i` and `j` after z-scoring both.
pub fn iie_strength_normalized(ds: &Dataset, i: usize, j: usize) -> Result<IieStrength> {
    let col = |k: usize| {
        ds.column(k)
            .ok_or_else(|| Error::usage(format!("column {k} missing or not numeric")))
    };
    iie_strength(&zscore(col(i)?), &zscore(col(j)?))
}

/// Strength annotation of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeStrength {
    /// `ln T_N`.
    pub log_strength: f64,
    pub degenerate: bool,
    pub cause_ties: usize,
    pub effect_ties: usize,
}

/// Log-transformed normalized strengths for the edges of one graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrengthMatrix {
    d: usize,
    entries: BTreeMap<(usize, usize), EdgeStrength>,
    /// Per-variable entropy estimates on standardized data.
    pub entropies: Vec<EntropyEstimate>,
}

impl StrengthMatrix {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, from: usize, to: usize) -> Option<&EdgeStrength> {
        self.entries.get(&(from, to))
    }

    pub fn log_strength(&self, from: usize, to: usize) -> Option<f64> {
        self.get(from, to).map(|e| e.log_strength)
    }

    /// Edges in ascending `(from, to)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &EdgeStrength)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, from: usize, to: usize, strength: EdgeStrength) {
        self.entries.insert((from, to), strength);
    }
}

/// Strength of every edge of `graph`, computed on z-scored columns of `ds`.
/// Orientation comes from the graph; the strength itself is symmetric.
pub fn edge_strengths(graph: &CausalGraph, ds: &Dataset) -> Result<StrengthMatrix> {
    let d = graph.adjacency.d();
    if ds.n_vars() != d {
        return Err(Error::usage(format!("graph has {d} nodes, data has {} columns", ds.n_vars())));
    }
    let entropies = (0..d)
        .map(|k| {
            let col = ds
                .column(k)
                .ok_or_else(|| Error::usage(format!("column {k} is not numeric")))?;
            spacing_entropy(&zscore(col))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = StrengthMatrix {
        d,
        entries: BTreeMap::new(),
        entropies,
    };
    for (i, j) in graph.adjacency.edges() {
        let s = strength_from_entropies(out.entropies[i], out.entropies[j]);
        out.entries.insert(
            (i, j),
            EdgeStrength {
                log_strength: s.value.ln(),
                degenerate: s.degenerate,
                cause_ties: s.cause_entropy.tie_corrections,
                effect_ties: s.effect_entropy.tie_corrections,
            },
        );
    }
    Ok(out)
}

/// Removes every edge whose log strength is below `threshold` (edges without a
/// strength count as below any finite threshold) and records the surviving
/// strengths on the returned graph.
pub fn prune(graph: &CausalGraph, strengths: &StrengthMatrix, threshold: f64) -> Result<CausalGraph> {
    let mut out = CausalGraph::new(graph.adjacency.clone(), graph.variables.clone())?;
    let edges: Vec<(usize, usize)> = graph.adjacency.edges().collect();
    for (i, j) in edges {
        let s = strengths.log_strength(i, j).unwrap_or(f64::NEG_INFINITY);
        if s < threshold {
            out.remove_edge(i, j);
        } else if s.is_finite() {
            out.set_strength(i, j, s)?;
        }
    }
    Ok(out)
}
