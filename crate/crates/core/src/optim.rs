//! Global-norm gradient clipping and Adam.

use crate::error::{Error, Result};
use crate::model::{Gradients, ProjectionModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Gradients are rescaled so their global L2 norm does not exceed this.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            clip_norm: Some(2.0),
        }
    }
}

/// Rescales `grads` in place so that their global norm is at most `clip_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, clip_norm: f64) -> Result<f64> {
    let norm = grads.global_norm();
    if !norm.is_finite() {
        return Err(Error::NonFiniteGradient);
    }
    if norm > clip_norm {
        grads.scale(clip_norm / norm);
    }
    Ok(norm)
}

/// Adam moment estimates for a flat list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(config: AdamConfig, model: &ProjectionModel) -> Self {
        Self::new(config, &[model.weights().len(), model.bias().len()])
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// One bias-corrected Adam update of `params` from `grads`.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch);
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::ShapeMismatch);
            }
        }
        if grads.iter().flat_map(|g| g.iter()).any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }

        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step);
        let bc2 = 1.0 - beta2.powi(self.step);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }

    /// Clips `grads` (if configured) and applies one update to `model`.
    pub fn step_model(&mut self, model: &mut ProjectionModel, mut grads: Gradients) -> Result<()> {
        if grads.weights.len() != model.weights().len() || grads.bias.len() != model.bias().len() {
            return Err(Error::ShapeMismatch);
        }
        match self.config.clip_norm {
            Some(c) => {
                clip_global_norm(&mut grads, c)?;
            }
            None if !grads.global_norm().is_finite() => return Err(Error::NonFiniteGradient),
            None => {}
        }
        let (w, b) = model.params_mut();
        self.update(&mut [w, b], &[&grads.weights, &grads.bias])
    }
}
