//! Dense matrices, reverse-mode gradients and the Adam optimizer used to train
//! the policy and critic networks.

mod adam;
mod gradcheck;
mod matrix;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheck, GRADCHECK_FLOOR};
pub use matrix::{log_sigmoid, sigmoid, Matrix};
pub use tape::{Gradients, Tape, Var, LAYER_NORM_EPS};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

/// Named collection of trainable matrices addressed by slot index.
///
/// Slots are registered on a tape as `base + id`, so sets with disjoint
/// ranges can share one tape.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    base: usize,
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Empty set whose tape slots start at `base`.
    pub fn with_base(base: usize) -> Self {
        Self {
            base,
            ..Self::default()
        }
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn push(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    /// Xavier/Glorot-normal initialized `rows×cols` matrix.
    pub fn push_glorot<R: Rng + ?Sized>(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut R) -> usize {
        let std = (2.0 / (rows + cols) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let m = Matrix::from_fn(rows, cols, |_, _| normal.sample(rng));
        self.push(name, m)
    }

    pub fn get(&self, id: usize) -> &Matrix {
        &self.values[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Matrix {
        &mut self.values[id]
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.values.iter().map(Matrix::shape).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Matrix::is_finite)
    }

    /// Registers slot `id` on `tape`.
    pub fn var(&self, tape: &mut Tape, id: usize) -> Var {
        tape.param(self.base + id, &self.values[id])
    }

    /// This set's gradients out of a backward pass.
    pub fn gradients(&self, grads: &Gradients) -> Result<Vec<Matrix>> {
        grads.for_param_range(self.base, &self.shapes())
    }
}
