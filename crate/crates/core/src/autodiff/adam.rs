use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Hyperparameters for [`AdamState`]. Betas default to the usual GAN setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        Self {
            config,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of every parameter, then zeroes the grads.
    pub fn step(&mut self, params: &mut [Tensor]) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::contract(format!(
                "adam state tracks {} tensors, got {}",
                self.first.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != self.first[i].len() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    detail: format!("parameter {i} has shape {:?}", p.shape()),
                });
            }
            if p.grad().is_none() {
                return Err(Error::contract(format!("parameter {i} has no gradient")));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let (data, grad) = p.parts_mut();
            let grad = grad.expect("checked above");
            for (((x, g), mi), vi) in data.iter_mut().zip(grad.iter_mut()).zip(m).zip(v) {
                *mi = beta1 * *mi + (1.0 - beta1) * *g;
                *vi = beta2 * *vi + (1.0 - beta2) * *g * *g;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
                *g = 0.0;
            }
        }
        Ok(())
    }
}
