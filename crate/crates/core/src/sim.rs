//! Synthetic additive-noise structural causal models with known ground truth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, VariableTable};
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::numeric::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    #[default]
    Linear,
    /// `Σ w_p·x_p + Σ v_p·x_p²`
    Quadratic,
}

impl std::str::FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            other => Err(Error::Validation(format!("unknown mechanism `{other}`"))),
        }
    }
}

/// Structural equation of one node: `intercept + Σ linear·x_p + Σ quadratic·x_p² + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub intercept: f64,
    /// `(parent, weight)` pairs, one per parent.
    pub linear: Vec<(usize, f64)>,
    /// `(parent, weight)` pairs on squared parent values; empty for linear models.
    pub quadratic: Vec<(usize, f64)>,
}

impl Mechanism {
    fn eval(&self, row: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().map(|&(p, w)| w * row[p]).sum();
        let quad: f64 = self.quadratic.iter().map(|&(p, v)| v * row[p] * row[p]).sum();
        self.intercept + lin + quad
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    pub graph: AdjacencyMatrix,
    pub mechanisms: Vec<Mechanism>,
    pub noise_scales: Vec<f64>,
}

impl StructuralModel {
    /// Checks that each mechanism depends on exactly its node's parents with
    /// non-zero weights and that noise scales are positive.
    pub fn validate(&self) -> Result<()> {
        let d = self.graph.d();
        if self.mechanisms.len() != d || self.noise_scales.len() != d {
            return Err(Error::Validation("mechanism/noise count differs from node count".into()));
        }
        if !self.graph.is_dag() {
            return Err(Error::Validation("structural model graph is cyclic".into()));
        }
        for (j, mech) in self.mechanisms.iter().enumerate() {
            let parents = self.graph.parents(j)?;
            let mut lin: Vec<usize> = mech.linear.iter().map(|&(p, _)| p).collect();
            lin.sort_unstable();
            if lin != parents {
                return Err(Error::Validation(format!("mechanism of node {j} does not match its parents")));
            }
            if mech.linear.iter().any(|&(_, w)| w == 0.0) {
                return Err(Error::Validation(format!("mechanism of node {j} is constant in a parent")));
            }
            if mech.quadratic.iter().any(|&(p, _)| !parents.contains(&p)) {
                return Err(Error::Validation(format!("quadratic term of node {j} references a non-parent")));
            }
            if !(self.noise_scales[j] > 0.0) {
                return Err(Error::Validation(format!("noise scale of node {j} must be positive")));
            }
        }
        Ok(())
    }

    /// Linear weight matrix `W` with `W[i][j]` the weight of edge `i → j`.
    pub fn weight_matrix(&self) -> Matrix {
        let d = self.graph.d();
        let mut w = Matrix::zeros(d, d);
        for (j, mech) in self.mechanisms.iter().enumerate() {
            for &(p, weight) in &mech.linear {
                w.set(p, j, weight);
            }
        }
        w
    }
}

/// Random model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub d: usize,
    pub edge_probability: f64,
    pub mechanism: MechanismKind,
    /// Magnitude range of linear weights; the sign is drawn uniformly.
    pub weight_range: (f64, f64),
    /// Magnitude range of quadratic weights (quadratic mechanisms only).
    pub quadratic_range: (f64, f64),
    pub noise_scale_range: (f64, f64),
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            d: 4,
            edge_probability: 0.5,
            mechanism: MechanismKind::Linear,
            weight_range: (0.5, 2.0),
            quadratic_range: (0.2, 0.5),
            noise_scale_range: (0.5, 2.0),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Validation("generator needs d ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return Err(Error::Validation("edge probability must lie in [0, 1]".into()));
        }
        let (lo, hi) = self.weight_range;
        if lo < 0.5 || hi < lo {
            return Err(Error::Validation("weight range must satisfy 0.5 ≤ low ≤ high".into()));
        }
        let (lo, hi) = self.noise_scale_range;
        if !(lo > 0.0) || hi < lo {
            return Err(Error::Validation("noise scale range must be positive and ordered".into()));
        }
        let (lo, hi) = self.quadratic_range;
        if !(lo > 0.0) || hi < lo {
            return Err(Error::Validation("quadratic range must be positive and ordered".into()));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Random DAG: a uniformly random node order, then each order-respecting edge
/// independently with `edge_probability`.
pub fn random_dag_with<R: Rng + ?Sized>(d: usize, edge_probability: f64, rng: &mut R) -> AdjacencyMatrix {
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let mut a = AdjacencyMatrix::empty(d);
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if rng.gen_bool(edge_probability) {
                a.insert(i, j).expect("distinct in-range nodes");
            }
        }
    }
    a
}

/// [`random_dag_with`] seeded from `cfg.seed`.
pub fn random_dag(cfg: &GeneratorConfig) -> Result<AdjacencyMatrix> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(random_dag_with(cfg.d, cfg.edge_probability, &mut rng))
}

/// Random structural model over a random DAG (same stream as [`random_dag`]).
pub fn random_model(cfg: &GeneratorConfig) -> Result<StructuralModel> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let graph = random_dag_with(cfg.d, cfg.edge_probability, &mut rng);
    model_for_graph(graph, cfg, &mut rng)
}

/// Draws mechanisms and noise scales for a fixed graph.
pub fn model_for_graph<R: Rng + ?Sized>(graph: AdjacencyMatrix, cfg: &GeneratorConfig, rng: &mut R) -> Result<StructuralModel> {
    let mut mechanisms = Vec::with_capacity(graph.d());
    for j in 0..graph.d() {
        let parents = graph.parents(j)?;
        let mut signed = |range| {
            let w = uniform(rng, range);
            if rng.gen_bool(0.5) {
                w
            } else {
                -w
            }
        };
        let linear = parents.iter().map(|&p| (p, signed(cfg.weight_range))).collect();
        let quadratic = match cfg.mechanism {
            MechanismKind::Linear => Vec::new(),
            MechanismKind::Quadratic => parents.iter().map(|&p| (p, signed(cfg.quadratic_range))).collect(),
        };
        mechanisms.push(Mechanism {
            intercept: 0.0,
            linear,
            quadratic,
        });
    }
    let noise_scales = (0..graph.d()).map(|_| uniform(rng, cfg.noise_scale_range)).collect();
    let model = StructuralModel {
        graph,
        mechanisms,
        noise_scales,
    };
    model.validate()?;
    Ok(model)
}

/// Samples `m` rows by evaluating nodes in topological order with independent
/// Gaussian noise.
pub fn generate(model: &StructuralModel, m: usize, seed: u64) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::usage("sample count must be ≥ 1"));
    }
    model.validate()?;
    let d = model.graph.d();
    let order = model.graph.topological_order()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals: Vec<Normal<f64>> = model
        .noise_scales
        .iter()
        .map(|&s| Normal::new(0.0, s).expect("validated positive scale"))
        .collect();
    let mut samples = Matrix::zeros(m, d);
    for r in 0..m {
        let row = samples.row_mut(r);
        for &j in &order {
            row[j] = model.mechanisms[j].eval(row) + normals[j].sample(&mut rng);
        }
    }
    Dataset::from_matrix(&samples, VariableTable::numbered(d))
}

/// Edge edits turning `a` into `b`: each unordered node pair whose edge
/// status differs counts once, so a reversal costs 1.
pub fn structural_hamming_distance(a: &AdjacencyMatrix, b: &AdjacencyMatrix) -> Result<usize> {
    if a.d() != b.d() {
        return Err(Error::usage(format!("SHD needs equal sizes, got {} and {}", a.d(), b.d())));
    }
    let d = a.d();
    let mut count = 0;
    for i in 0..d {
        for j in i + 1..d {
            if (a.has_edge(i, j), a.has_edge(j, i)) != (b.has_edge(i, j), b.has_edge(j, i)) {
                count += 1;
            }
        }
    }
    Ok(count)
}
