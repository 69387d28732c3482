//! First-order optimizers over a flat [`ParamStore`].
//!
//! Updates are pure functions of `(state, gradients)`: the same seed-derived
//! gradient sequence always yields the same parameters. A non-finite
//! gradient aborts the step with the offending layer named — parameters are
//! never silently poisoned.

use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

/// Optimizer family and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptAlgo {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    RmsProp { decay: f64, eps: f64 },
}

/// Optimizer state: algorithm, learning rate, step counter, moment arrays.
#[derive(Debug, Clone)]
pub struct OptState {
    pub algo: OptAlgo,
    pub lr: f64,
    step_count: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptState {
    /// Adam with the conventional defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
    pub fn adam(lr: f64, n_params: usize) -> OptState {
        OptState {
            algo: OptAlgo::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 },
            lr,
            step_count: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// RMSprop with decay 0.9 and ε = 1e-8.
    pub fn rmsprop(lr: f64, n_params: usize) -> OptState {
        OptState {
            algo: OptAlgo::RmsProp { decay: 0.9, eps: 1e-8 },
            lr,
            step_count: 0,
            m: Vec::new(),
            v: vec![0.0; n_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update from the accumulated gradients, then clear them.
    ///
    /// Errors with [`Error::Numeric`] (naming the layer) if any gradient is
    /// non-finite; parameters are left untouched in that case.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if params.len() != self.v.len() {
            return Err(Error::Dimension(format!(
                "optimizer sized for {} params, store has {}",
                self.v.len(),
                params.len()
            )));
        }
        if let Some(i) = params.grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient in layer '{}' (flat index {i})",
                params.layout().name_of(i)
            )));
        }
        match self.algo {
            OptAlgo::Adam { beta1, beta2, eps } => {
                let t = (self.step_count + 1) as f64;
                let bc1 = 1.0 - beta1.powf(t);
                let bc2 = 1.0 - beta2.powf(t);
                for i in 0..params.values.len() {
                    let g = params.grads[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params.values[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptAlgo::RmsProp { decay, eps } => {
                for i in 0..params.values.len() {
                    let g = params.grads[i];
                    self.v[i] = decay * self.v[i] + (1.0 - decay) * g * g;
                    params.values[i] -= self.lr * g / (self.v[i].sqrt() + eps);
                }
            }
        }
        params.clear_grads();
        self.step_count += 1;
        Ok(())
    }
}
