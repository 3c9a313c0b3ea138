//! Plain gradient descent with a cosine-annealed learning rate.

use std::f64::consts::PI;

use super::module::{Module, TensorMut};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerState {
    pub base_lr: f64,
    pub epoch: usize,
    pub total_epochs: usize,
}

impl OptimizerState {
    pub fn new(base_lr: f64, total_epochs: usize) -> Self {
        Self {
            base_lr,
            epoch: 0,
            total_epochs,
        }
    }

    pub fn lr(&self) -> f64 {
        cosine_lr(self)
    }

    pub fn advance(&mut self) {
        self.epoch = (self.epoch + 1).min(self.total_epochs);
    }
}

/// `base_lr * (1 + cos(pi * epoch / total)) / 2`; zero when `total_epochs` is 0.
pub fn cosine_lr(state: &OptimizerState) -> f64 {
    if state.total_epochs == 0 {
        return 0.0;
    }
    let t = state.epoch.min(state.total_epochs) as f64 / state.total_epochs as f64;
    state.base_lr * 0.5 * (1.0 + (PI * t).cos())
}

/// `theta <- theta - lr * g`, elementwise.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape {
            op: "sgd_step",
            left: (params.len(), 1),
            right: (grads.len(), 1),
        });
    }
    if lr == 0.0 {
        return Ok(());
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

/// Applies [`sgd_step`] to every parameter of a module.
pub fn sgd_update<M: Module + ?Sized>(module: &mut M, lr: f64) -> Result<()> {
    let mut result = Ok(());
    module.visit_mut("", &mut |_, t| {
        if let TensorMut::Param(p) = t {
            if result.is_ok() {
                let grad = p.grad.data().to_vec();
                result = sgd_step(p.value.data_mut(), &grad, lr);
            }
        }
    });
    result
}
