//! Two-layer tanh network on mean-pooled encodings, predicting the reward.

use rand::Rng;

use crate::error::Result;
use crate::numeric::{Matrix, ParamSet, Tape, Var};

#[derive(Debug, Clone)]
pub struct Critic {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(d_model: usize, hidden: usize, params: &mut ParamSet, rng: &mut R) -> Self {
        Self {
            w1: params.push_glorot("critic.w1", d_model, hidden, rng),
            b1: params.push("critic.b1", Matrix::zeros(1, hidden)),
            w2: params.push_glorot("critic.w2", hidden, 1, rng),
            b2: params.push("critic.b2", Matrix::zeros(1, 1)),
        }
    }

    /// Scalar (1×1) baseline for `d×d_model` encodings.
    pub fn forward(&self, params: &ParamSet, tape: &mut Tape, enc: Var) -> Result<Var> {
        let pooled = tape.mean_rows(enc);
        let (w1, b1) = (params.var(tape, self.w1), params.var(tape, self.b1));
        let (w2, b2) = (params.var(tape, self.w2), params.var(tape, self.b2));
        let h = tape.matmul(pooled, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.tanh(h);
        let out = tape.matmul(h, w2)?;
        tape.add_row(out, b2)
    }

    /// Evaluates the critic on a plain matrix.
    pub fn value(&self, params: &ParamSet, enc: &Matrix) -> Result<f64> {
        let mut tape = Tape::new();
        let e = tape.constant(enc.clone());
        let v = self.forward(params, &mut tape, e)?;
        Ok(tape.value(v).sum())
    }
}
