//! Adam with bias correction, applied in place to a [`WeteModel`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grad::Gradients;
use crate::math::sqrt;
use crate::model::{ParamId, WeteModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Optimizer state: per-tensor first and second moments plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<(ParamId, Moments)>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn moments_for(&mut self, id: ParamId, len: usize) -> &mut Moments {
        let pos = match self.moments.iter().position(|(p, _)| *p == id) {
            Some(pos) => pos,
            None => {
                self.moments.push((id, Moments { m: vec![0.0; len], v: vec![0.0; len] }));
                self.moments.len() - 1
            }
        };
        &mut self.moments[pos].1
    }

    /// One update. Tensors absent from `grads` are untouched, as are frozen
    /// rows of the word embeddings.
    pub fn step(&mut self, model: &mut WeteModel, grads: &Gradients) -> Result<()> {
        for (id, g) in grads.iter() {
            let expected = model.param(id).len();
            if g.len() != expected {
                return Err(Error::DimensionMismatch { expected, got: g.len() });
            }
        }
        self.step += 1;
        let cfg = self.config;
        let t = self.step;
        let dim = model.embed_dim();
        let mask: Vec<bool> = model.word_embeddings.trainable_mask().to_vec();
        for (id, g) in grads.iter() {
            if !model.is_trainable(id) {
                continue;
            }
            let mom = self.moments_for(id, g.len());
            let params = model.param_mut(id);
            if id == ParamId::WordEmbeddings {
                for (row, &trainable) in mask.iter().enumerate() {
                    if trainable {
                        let r = row * dim..(row + 1) * dim;
                        update(&cfg, t, &mut params[r.clone()], &g[r.clone()], &mut mom.m[r.clone()], &mut mom.v[r]);
                    }
                }
            } else {
                update(&cfg, t, params, g, &mut mom.m, &mut mom.v);
            }
        }
        Ok(())
    }
}

/// Bias-corrected Adam update of one slice at step `t` (1-based).
pub fn update(cfg: &AdamConfig, t: u64, params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
    let t = t as f64;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        params[i] -= cfg.lr * (m[i] / bc1) / (sqrt(v[i] / bc2) + cfg.eps);
    }
}

/// Free-function form of [`Adam::step`].
pub fn adam_step(model: &mut WeteModel, grads: &Gradients, state: &mut Adam) -> Result<()> {
    state.step(model, grads)
}
