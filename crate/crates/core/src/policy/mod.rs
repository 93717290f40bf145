//! Graph-generating policy: attention encoder, pairwise decoder, independent
//! Bernoulli edges, and a critic baseline trained by actor-critic.

mod critic;
mod decoder;
mod encoder;
mod trainer;

pub use critic::Critic;
pub use decoder::{Decoder, DIAGONAL_LOGIT};
pub use encoder::{positional_encoding, Encoder, EncoderConfig};
pub use trainer::{train, IterationLog, TrainState, Trainer, TrainerConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::numeric::{log_sigmoid, sigmoid, Matrix, ParamSet, Tape, Var};

/// Actor (encoder + decoder) and critic with their weights. Actor slots come
/// first on the tape, critic slots follow.
#[derive(Debug, Clone)]
pub struct Policy {
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub critic: Critic,
    pub actor_params: ParamSet,
    pub critic_params: ParamSet,
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(
        encoder: &EncoderConfig,
        decoder_hidden: usize,
        critic_hidden: usize,
        input_width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if decoder_hidden == 0 || critic_hidden == 0 {
            return Err(Error::Validation("decoder and critic widths must be ≥ 1".into()));
        }
        let mut actor_params = ParamSet::new();
        let enc = Encoder::new(encoder, input_width, &mut actor_params, rng)?;
        let dec = Decoder::new(encoder.d_model, decoder_hidden, &mut actor_params, rng);
        let mut critic_params = ParamSet::with_base(actor_params.len());
        let critic = Critic::new(encoder.d_model, critic_hidden, &mut critic_params, rng);
        Ok(Self {
            encoder: enc,
            decoder: dec,
            critic,
            actor_params,
            critic_params,
        })
    }

    /// Encodings and edge logits for one `d×s` batch.
    pub fn forward(&self, tape: &mut Tape, batch: &Matrix) -> Result<(Var, Var)> {
        let b = tape.constant(batch.clone());
        let enc = self.encoder.forward(&self.actor_params, tape, b)?;
        let logits = self.decoder.forward(&self.actor_params, tape, enc)?;
        Ok((enc, logits))
    }

    /// Edge logits without recording gradients for later use.
    pub fn logits(&self, batch: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let (_, g) = self.forward(&mut tape, batch)?;
        Ok(tape.value(g).clone())
    }
}

/// Draws every off-diagonal edge independently with probability `σ(logit)`
/// and returns the graph with the log-probability of the draw.
pub fn sample_adjacency<R: Rng + ?Sized>(logits: &Matrix, rng: &mut R) -> Result<(AdjacencyMatrix, f64)> {
    let d = check_square(logits)?;
    let mut a = AdjacencyMatrix::empty(d);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let u: f64 = rng.gen();
                if u < sigmoid(logits.get(i, j)) {
                    a.insert(i, j)?;
                }
            }
        }
    }
    let lp = log_prob(logits, &a)?;
    Ok((a, lp))
}

/// [`sample_adjacency`] with a generator seeded from `seed`.
pub fn sample_adjacency_seeded(logits: &Matrix, seed: u64) -> Result<(AdjacencyMatrix, f64)> {
    sample_adjacency(logits, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `Σ_{i≠j} [a_ij·ln σ(g_ij) + (1 − a_ij)·ln σ(−g_ij)]`.
pub fn log_prob(logits: &Matrix, a: &AdjacencyMatrix) -> Result<f64> {
    let d = check_square(logits)?;
    if a.d() != d {
        return Err(Error::usage(format!("graph has {} nodes, logits are {d}×{d}", a.d())));
    }
    let mut total = 0.0;
    for i in 0..d {
        for j in (0..d).filter(|&j| j != i) {
            let g = logits.get(i, j);
            total += if a.has_edge(i, j) { log_sigmoid(g) } else { log_sigmoid(-g) };
        }
    }
    Ok(total)
}

fn check_square(m: &Matrix) -> Result<usize> {
    if m.rows() != m.cols() {
        return Err(Error::Shape {
            op: "logits",
            lhs: m.shape(),
            rhs: (m.cols(), m.rows()),
        });
    }
    Ok(m.rows())
}

/// Policy-gradient surrogate `−(1/B) Σ_b adv_b · log π(A_b)`.
///
/// The log-probability is linear in the sampled entries, so the batch folds
/// into two weight matrices and the tape sees a single `d×d` expression.
pub fn actor_surrogate(tape: &mut Tape, logits: Var, samples: &[AdjacencyMatrix], advantages: &[f64]) -> Result<Var> {
    let (d, cols) = tape.shape(logits);
    if d != cols || samples.len() != advantages.len() || samples.is_empty() {
        return Err(Error::usage("surrogate needs square logits and one advantage per sample"));
    }
    let inv_b = 1.0 / samples.len() as f64;
    let mut on = Matrix::zeros(d, d);
    let mut off = Matrix::zeros(d, d);
    for (a, &adv) in samples.iter().zip(advantages) {
        if a.d() != d {
            return Err(Error::usage("sample size differs from logits"));
        }
        for i in 0..d {
            for j in (0..d).filter(|&j| j != i) {
                let slot = if a.has_edge(i, j) { &mut on } else { &mut off };
                slot.set(i, j, slot.get(i, j) + adv * inv_b);
            }
        }
    }
    let pos = tape.log_sigmoid(logits);
    let neg_logits = tape.scale(logits, -1.0);
    let neg = tape.log_sigmoid(neg_logits);
    let (on, off) = (tape.constant(on), tape.constant(off));
    let a = tape.mul(on, pos)?;
    let b = tape.mul(off, neg)?;
    let both = tape.add(a, b)?;
    let total = tape.sum(both);
    Ok(tape.scale(total, -1.0))
}
