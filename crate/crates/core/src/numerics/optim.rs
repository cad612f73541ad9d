//! AdamW with global-norm gradient clipping.
//!
//! ```text
//! g  ← g · min(1, clip / ‖g‖₂)          (norm over all parameters)
//! θ  ← θ − lr · λ · θ                    (decoupled decay)
//! m  ← β₁ m + (1 − β₁) g
//! v  ← β₂ v + (1 − β₂) g²
//! θ  ← θ − lr · m̂ / (√v̂ + ε)            (m̂, v̂ bias-corrected)
//! ```

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global L2 norm the gradient is clipped to; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
        }
    }
}

/// Moment accumulators and step counter for a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: u64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
    pub clip_scale: f64,
}

impl OptimizerState {
    pub fn new(config: AdamWConfig, params: &[Tensor]) -> Self {
        OptimizerState {
            config,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update with `config.learning_rate` for every parameter.
    pub fn step(&mut self, params: &mut [Tensor]) -> Result<StepStats> {
        let lrs = vec![self.config.learning_rate; params.len()];
        self.step_with_rates(params, &lrs)
    }

    /// One update with a per-parameter learning rate.
    pub fn step_with_rates(&mut self, params: &mut [Tensor], rates: &[f64]) -> Result<StepStats> {
        if params.len() != self.first.len() || rates.len() != params.len() {
            return Err(Error::invalid(format!(
                "optimizer tracks {} parameters, got {} (with {} rates)",
                self.first.len(),
                params.len(),
                rates.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != self.first[i].len() {
                return Err(Error::ShapeMismatch {
                    op: "adamw",
                    lhs: p.shape().to_vec(),
                    rhs: vec![self.first[i].len()],
                });
            }
            if p.grad().is_none() {
                return Err(Error::MissingGrad(format!("#{i}")));
            }
        }

        let sq: f64 = params
            .iter()
            .flat_map(|p| p.grad().unwrap().iter())
            .map(|g| g * g)
            .sum();
        let grad_norm = sq.sqrt();
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        let clip_scale = match self.config.clip_norm {
            Some(c) if grad_norm > c => c / grad_norm,
            _ => 1.0,
        };

        self.step += 1;
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
            ..
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);

        for (i, p) in params.iter_mut().enumerate() {
            let lr = rates[i];
            let grad = p.grad().unwrap().to_vec();
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (j, theta) in p.values_mut().iter_mut().enumerate() {
                let g = grad[j] * clip_scale;
                *theta -= lr * weight_decay * *theta;
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(StepStats {
            step: self.step,
            grad_norm,
            clip_scale,
        })
    }
}

/// Convenience wrapper: one AdamW step over `params` using `state`.
pub fn adamw_step(params: &mut [Tensor], state: &mut OptimizerState) -> Result<StepStats> {
    state.step(params)
}
