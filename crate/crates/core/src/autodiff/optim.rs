use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub lr: f64,
    pub decay: f64,
    /// Global-norm gradient clipping; off unless set.
    pub clip_norm: Option<f64>,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig { lr: 0.1, decay: 0.99, clip_norm: None, weight_decay: 0.0 }
    }
}

/// Learning-rate schedule `lr(epoch) = base * decay^epoch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdState {
    pub config: SgdConfig,
    pub epoch: u32,
}

impl SgdState {
    pub fn new(config: SgdConfig) -> Result<Self> {
        if config.lr.is_nan() || config.lr < 0.0 || config.decay.is_nan() || config.decay <= 0.0 || config.decay > 1.0 {
            return Err(Error::invalid(format!("bad SGD schedule lr={} decay={}", config.lr, config.decay)));
        }
        Ok(SgdState { config, epoch: 0 })
    }

    pub fn lr(&self) -> f64 {
        Self::lr_at(&self.config, self.epoch)
    }

    pub fn lr_at(config: &SgdConfig, epoch: u32) -> f64 {
        config.lr * config.decay.powi(epoch as i32)
    }

    /// Called once after each completed epoch.
    pub fn end_epoch(&mut self) {
        self.epoch += 1;
    }
}

/// `p <- p - lr * g` over every trainable parameter holding a gradient, then
/// clears all gradient slots. Non-finite gradients abort before any update.
pub fn sgd_step(params: &mut ParamStore<f32>, state: &SgdState) -> Result<()> {
    for p in params.iter() {
        if let Some(g) = &p.tensor.grad {
            if let Some(k) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of `{}` at index {k}", p.name)));
            }
        }
    }
    let lr = state.lr() as f32;
    let wd = state.config.weight_decay as f32;
    let scale = match state.config.clip_norm {
        Some(max) => {
            let sq: f64 = params
                .iter()
                .filter(|p| p.trainable)
                .filter_map(|p| p.tensor.grad.as_ref())
                .flat_map(|g| g.iter().map(|&v| (v as f64) * (v as f64)))
                .sum();
            let norm = sq.sqrt();
            if norm > max {
                (max / norm) as f32
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    for p in params.iter_mut() {
        if !p.trainable {
            p.tensor.grad = None;
            continue;
        }
        if let Some(g) = p.tensor.grad.take() {
            for (w, gv) in p.tensor.data.iter_mut().zip(g) {
                let step = if wd != 0.0 { scale * gv + wd * *w } else { scale * gv };
                *w -= lr * step;
            }
        }
    }
    Ok(())
}
