use serde::{Deserialize, Serialize};

use super::{DilationParam, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// A named, mutable view of one trainable tensor.
pub struct ParamRef<'a> {
    pub name: String,
    pub tensor: &'a mut Tensor,
    /// Projection interval applied after the update.
    pub bounds: Option<(f64, f64)>,
    /// Multiplier on the learning rate for this parameter.
    pub lr_scale: f64,
}

impl<'a> ParamRef<'a> {
    pub fn weight(name: impl Into<String>, tensor: &'a mut Tensor) -> Self {
        Self {
            name: name.into(),
            tensor,
            bounds: None,
            lr_scale: 1.0,
        }
    }

    pub fn dilation(name: impl Into<String>, param: &'a mut DilationParam) -> Self {
        let bounds = Some(param.bounds());
        Self {
            name: name.into(),
            tensor: param.tensor_mut(),
            bounds,
            lr_scale: 1.0,
        }
    }
}

/// Moment accumulators for Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first: Vec::new(),
            second: Vec::new(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// Applies one update to every parameter in place and projects bounded
    /// parameters back into their interval.
    ///
    /// All gradients are validated before anything is modified, so an error
    /// leaves both the parameters and the state untouched.
    pub fn step(&mut self, params: &mut [ParamRef<'_>]) -> Result<(), TensorError> {
        for p in params.iter() {
            if p.tensor.grad().iter().any(|g| !g.is_finite()) {
                return Err(TensorError::NonFiniteGradient {
                    param: p.name.clone(),
                });
            }
        }
        if self.step_count == 0 && self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.tensor.numel()]).collect();
            self.second = self.first.clone();
        }
        let shapes_match = self.first.len() == params.len()
            && self.first.iter().zip(params.iter()).all(|(m, p)| m.len() == p.tensor.numel());
        if !shapes_match {
            return Err(TensorError::OptimizerStateMismatch);
        }

        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let step = lr * p.lr_scale;
            let grad = p.tensor.grad().to_vec();
            for (((w, g), m), v) in p.tensor.data_mut().iter_mut().zip(&grad).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= step * m_hat / (v_hat.sqrt() + epsilon);
            }
            if let Some((lo, hi)) = p.bounds {
                p.tensor.data_mut().iter_mut().for_each(|w| *w = w.clamp(lo, hi));
            }
        }
        Ok(())
    }
}
