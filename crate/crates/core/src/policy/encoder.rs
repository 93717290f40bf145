//! Attention encoder: each variable's batch column is one sequence position.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, ParamSet, Tape, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    /// Hidden width of each feed-forward sublayer.
    pub d_ff: usize,
    /// Adds sinusoidal position codes to the projected input. Off by default,
    /// which keeps the encoder equivariant to relabeling the variables.
    pub positional_encoding: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 4,
            d_model: 64,
            d_ff: 128,
            positional_encoding: false,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.d_model == 0 || self.d_ff == 0 {
            return Err(Error::Validation("encoder sizes must all be ≥ 1".into()));
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::Validation(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LayerSlots {
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln1_gain: usize,
    ln1_bias: usize,
    ff1_w: usize,
    ff1_b: usize,
    ff2_w: usize,
    ff2_b: usize,
    ln2_gain: usize,
    ln2_bias: usize,
}

/// Layout of the encoder inside a [`ParamSet`]; the weights live in the set.
#[derive(Debug, Clone)]
pub struct Encoder {
    cfg: EncoderConfig,
    input_width: usize,
    w_in: usize,
    b_in: usize,
    layers: Vec<LayerSlots>,
}

impl Encoder {
    /// Registers freshly initialized weights for inputs of width `input_width`.
    pub fn new<R: Rng + ?Sized>(cfg: &EncoderConfig, input_width: usize, params: &mut ParamSet, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if input_width == 0 {
            return Err(Error::Validation("encoder input width must be ≥ 1".into()));
        }
        let dm = cfg.d_model;
        let w_in = params.push_glorot("enc.w_in", input_width, dm, rng);
        let b_in = params.push("enc.b_in", Matrix::zeros(1, dm));
        let layers = (0..cfg.layers)
            .map(|l| {
                let name = |s: &str| format!("enc.{l}.{s}");
                LayerSlots {
                    wq: params.push_glorot(name("wq"), dm, dm, rng),
                    wk: params.push_glorot(name("wk"), dm, dm, rng),
                    wv: params.push_glorot(name("wv"), dm, dm, rng),
                    wo: params.push_glorot(name("wo"), dm, dm, rng),
                    ln1_gain: params.push(name("ln1.gain"), Matrix::filled(1, dm, 1.0)),
                    ln1_bias: params.push(name("ln1.bias"), Matrix::zeros(1, dm)),
                    ff1_w: params.push_glorot(name("ff1.w"), dm, cfg.d_ff, rng),
                    ff1_b: params.push(name("ff1.b"), Matrix::zeros(1, cfg.d_ff)),
                    ff2_w: params.push_glorot(name("ff2.w"), cfg.d_ff, dm, rng),
                    ff2_b: params.push(name("ff2.b"), Matrix::zeros(1, dm)),
                    ln2_gain: params.push(name("ln2.gain"), Matrix::filled(1, dm, 1.0)),
                    ln2_bias: params.push(name("ln2.bias"), Matrix::zeros(1, dm)),
                }
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            input_width,
            w_in,
            b_in,
            layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    /// `d×s` batch to `d×d_model` encodings.
    pub fn forward(&self, params: &ParamSet, tape: &mut Tape, batch: Var) -> Result<Var> {
        let (d, s) = tape.shape(batch);
        if s != self.input_width {
            return Err(Error::usage(format!(
                "encoder expects batches with {} columns, got {s}",
                self.input_width
            )));
        }
        let w_in = params.var(tape, self.w_in);
        let b_in = params.var(tape, self.b_in);
        let mut x = tape.matmul(batch, w_in)?;
        x = tape.add_row(x, b_in)?;
        if self.cfg.positional_encoding {
            let pe = tape.constant(positional_encoding(d, self.cfg.d_model));
            x = tape.add(x, pe)?;
        }
        for layer in &self.layers {
            let attn = self.attention(params, tape, layer, x)?;
            let res = tape.add(x, attn)?;
            let (g, b) = (params.var(tape, layer.ln1_gain), params.var(tape, layer.ln1_bias));
            x = tape.layer_norm(res, g, b)?;

            let (w1, b1) = (params.var(tape, layer.ff1_w), params.var(tape, layer.ff1_b));
            let (w2, b2) = (params.var(tape, layer.ff2_w), params.var(tape, layer.ff2_b));
            let h = tape.matmul(x, w1)?;
            let h = tape.add_row(h, b1)?;
            let h = tape.relu(h);
            let f = tape.matmul(h, w2)?;
            let f = tape.add_row(f, b2)?;
            let res = tape.add(x, f)?;
            let (g, b) = (params.var(tape, layer.ln2_gain), params.var(tape, layer.ln2_bias));
            x = tape.layer_norm(res, g, b)?;
        }
        Ok(x)
    }

    fn attention(&self, params: &ParamSet, tape: &mut Tape, layer: &LayerSlots, x: Var) -> Result<Var> {
        let heads = self.cfg.heads;
        let dk = self.cfg.d_model / heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let (wq, wk, wv, wo) = (
            params.var(tape, layer.wq),
            params.var(tape, layer.wk),
            params.var(tape, layer.wv),
            params.var(tape, layer.wo),
        );
        let q = tape.matmul(x, wq)?;
        let k = tape.matmul(x, wk)?;
        let v = tape.matmul(x, wv)?;
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = tape.slice_cols(q, h * dk, dk)?;
            let kh = tape.slice_cols(k, h * dk, dk)?;
            let vh = tape.slice_cols(v, h * dk, dk)?;
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale);
            let weights = tape.softmax_rows(scores);
            outs.push(tape.matmul(weights, vh)?);
        }
        let cat = tape.concat_cols(&outs)?;
        tape.matmul(cat, wo)
    }
}

/// Sinusoidal codes: `sin(p / 10000^(2i/d))` in even columns, `cos` in odd.
pub fn positional_encoding(positions: usize, width: usize) -> Matrix {
    Matrix::from_fn(positions, width, |p, c| {
        let rate = 10000f64.powf((2 * (c / 2)) as f64 / width as f64);
        let angle = p as f64 / rate;
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}
