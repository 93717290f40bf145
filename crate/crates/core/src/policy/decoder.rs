//! Single-layer pairwise decoder: `g_ij = uᵀ tanh(W1 enc_i + W2 enc_j)`.
//!
//! Weights are stored transposed (`d_model×d_h`) so encodings stay row vectors.

use rand::Rng;

use crate::error::Result;
use crate::numeric::{ParamSet, Tape, Var};

/// Logit written on the diagonal; its sigmoid is exactly zero in `f64`.
pub const DIAGONAL_LOGIT: f64 = -1e9;

#[derive(Debug, Clone)]
pub struct Decoder {
    hidden: usize,
    w1: usize,
    w2: usize,
    u: usize,
}

impl Decoder {
    pub fn new<R: Rng + ?Sized>(d_model: usize, hidden: usize, params: &mut ParamSet, rng: &mut R) -> Self {
        Self {
            hidden,
            w1: params.push_glorot("dec.w1", d_model, hidden, rng),
            w2: params.push_glorot("dec.w2", d_model, hidden, rng),
            u: params.push_glorot("dec.u", hidden, 1, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn u_slot(&self) -> usize {
        self.u
    }

    /// `d×d_model` encodings to `d×d` edge logits (`i → j` at row `i`, column `j`).
    pub fn forward(&self, params: &ParamSet, tape: &mut Tape, enc: Var) -> Result<Var> {
        let d = tape.shape(enc).0;
        let (w1, w2, u) = (params.var(tape, self.w1), params.var(tape, self.w2), params.var(tape, self.u));
        let from = tape.matmul(enc, w1)?;
        let to = tape.matmul(enc, w2)?;
        let pairs = tape.pairwise_sum(from, to)?;
        let act = tape.tanh(pairs);
        let g = tape.matmul(act, u)?;
        let g = tape.reshape(g, d, d)?;
        tape.mask_diagonal(g, DIAGONAL_LOGIT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn logits(dec: &Decoder, params: &ParamSet, enc: &Matrix) -> Matrix {
        let mut tape = Tape::new();
        let e = tape.constant(enc.clone());
        let g = dec.forward(params, &mut tape, e).unwrap();
        tape.value(g).clone()
    }

    #[test]
    fn equal_rows_give_equal_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = ParamSet::new();
        let dec = Decoder::new(6, 4, &mut params, &mut rng);
        let enc = Matrix::from_fn(3, 6, |_, c| c as f64 * 0.3 - 0.5);
        let g = logits(&dec, &params, &enc);
        let v = g.get(0, 1);
        for i in 0..3 {
            assert_eq!(g.get(i, i), DIAGONAL_LOGIT);
            for j in (0..3).filter(|&j| j != i) {
                assert!((g.get(i, j) - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_u_gives_half_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut params = ParamSet::new();
        let dec = Decoder::new(4, 3, &mut params, &mut rng);
        *params.get_mut(dec.u_slot()) = Matrix::zeros(3, 1);
        let enc = Matrix::from_fn(3, 4, |i, c| (i + c) as f64);
        let g = logits(&dec, &params, &enc);
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                assert_eq!(g.get(i, j), 0.0);
                assert_eq!(crate::numeric::sigmoid(g.get(i, j)), 0.5);
            }
        }
    }

    #[test]
    fn directional() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut params = ParamSet::new();
        let dec = Decoder::new(4, 8, &mut params, &mut rng);
        let enc = Matrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
        let g = logits(&dec, &params, &enc);
        assert!((g.get(0, 1) - g.get(1, 0)).abs() > 1e-6);
    }
}
