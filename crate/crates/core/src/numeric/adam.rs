use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::Matrix;

/// Hyperparameters for [`AdamState`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Moment accumulators for one parameter group.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Matrix]) -> Self {
        let zeros = |p: &Matrix| Matrix::zeros(p.rows(), p.cols());
        Self {
            config,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Applies one bias-corrected Adam update in place.
    pub fn update(&mut self, params: &mut [Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: (params.len(), 1),
                rhs: (grads.len(), self.first.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            p.check_same(g, "adam_step")?;
            p.check_same(m, "adam_step")?;
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
