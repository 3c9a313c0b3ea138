//! Central-difference gradient oracle.
//!
//! [`finite_diff_check`] perturbs each parameter by `±h`, re-evaluates the
//! loss and compares `(L(θ+h) - L(θ-h)) / 2h` against the analytic gradient.
//! The error per coordinate is `|analytic - numeric| / max(1, |numeric|)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::layers::{BatchNorm, Linear};
use super::module::{flat_grads, flat_params, set_flat_params, zero_grad, Module};
use super::Matrix;
use crate::error::{Error, Result};

pub const MIN_STEP: f64 = 1e-7;
pub const MAX_STEP: f64 = 1e-4;

/// Something with a scalar loss over a flat parameter vector.
pub trait GradCheck {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, values: &[f64]) -> Result<()>;
    fn loss(&mut self) -> Result<f64>;
    /// Analytic gradient at the current parameters, ordered like [`GradCheck::params`].
    fn gradient(&mut self) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

pub fn finite_diff_check<G: GradCheck + ?Sized>(target: &mut G, step: f64) -> Result<GradCheckReport> {
    if !(MIN_STEP..=MAX_STEP).contains(&step) {
        return Err(Error::Precondition(format!(
            "finite-difference step {step} outside [{MIN_STEP}, {MAX_STEP}]"
        )));
    }
    let theta = target.params();
    let analytic = target.gradient()?;
    if analytic.len() != theta.len() {
        return Err(Error::Shape {
            op: "finite_diff_check",
            left: (theta.len(), 1),
            right: (analytic.len(), 1),
        });
    }
    let mut probe = theta.clone();
    let mut report = GradCheckReport {
        max_error: 0.0,
        worst_index: 0,
        checked: theta.len(),
    };
    for i in 0..theta.len() {
        probe[i] = theta[i] + step;
        target.set_params(&probe)?;
        let plus = target.loss()?;
        probe[i] = theta[i] - step;
        target.set_params(&probe)?;
        let minus = target.loss()?;
        probe[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            target.set_params(&theta)?;
            return Err(Error::NonFiniteLoss);
        }
        let numeric = (plus - minus) / (2.0 * step);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        if err > report.max_error {
            report.max_error = err;
            report.worst_index = i;
        }
    }
    target.set_params(&theta)?;
    Ok(report)
}

/// A block with any number of matrix inputs and outputs.
pub trait Differentiable: Module {
    fn forward_many(&mut self, inputs: &[Matrix]) -> Result<Vec<Matrix>>;
    /// Takes one upstream gradient per output, returns one gradient per input.
    fn backward_many(&mut self, grads: &[Matrix]) -> Result<Vec<Matrix>>;
}

/// Turns a [`Differentiable`] block into a scalar objective `Σ_k <out_k, R_k>`
/// with fixed Gaussian projections `R_k`. Both the block parameters and the
/// inputs are treated as coordinates to check.
pub struct ProjectionProbe<B> {
    pub block: B,
    pub inputs: Vec<Matrix>,
    projections: Vec<Matrix>,
    seed: u64,
}

impl<B: Differentiable> ProjectionProbe<B> {
    pub fn new(block: B, inputs: Vec<Matrix>, seed: u64) -> Self {
        Self {
            block,
            inputs,
            projections: Vec::new(),
            seed,
        }
    }

    fn ensure_projections(&mut self, outputs: &[Matrix]) {
        if self.projections.len() == outputs.len() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.projections = outputs
            .iter()
            .map(|o| {
                let data = (0..o.data().len())
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                Matrix::from_vec(o.rows(), o.cols(), data).expect("sized")
            })
            .collect();
    }
}

impl<B: Differentiable> GradCheck for ProjectionProbe<B> {
    fn params(&self) -> Vec<f64> {
        let mut p = flat_params(&self.block);
        for x in &self.inputs {
            p.extend_from_slice(x.data());
        }
        p
    }

    fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let n = values.len() - self.inputs.iter().map(|x| x.data().len()).sum::<usize>();
        set_flat_params(&mut self.block, &values[..n])?;
        let mut offset = n;
        for x in &mut self.inputs {
            let len = x.data().len();
            x.data_mut().copy_from_slice(&values[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    fn loss(&mut self) -> Result<f64> {
        let outputs = self.block.forward_many(&self.inputs)?;
        self.ensure_projections(&outputs);
        Ok(outputs
            .iter()
            .zip(&self.projections)
            .map(|(o, r)| o.data().iter().zip(r.data()).map(|(a, b)| a * b).sum::<f64>())
            .sum())
    }

    fn gradient(&mut self) -> Result<Vec<f64>> {
        zero_grad(&mut self.block);
        let outputs = self.block.forward_many(&self.inputs)?;
        self.ensure_projections(&outputs);
        let input_grads = self.block.backward_many(&self.projections.clone())?;
        let mut g = flat_grads(&self.block);
        for d in input_grads {
            g.extend_from_slice(d.data());
        }
        Ok(g)
    }
}

impl Differentiable for Linear {
    fn forward_many(&mut self, inputs: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![self.forward(&inputs[0])?])
    }

    fn backward_many(&mut self, grads: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![self.backward(&grads[0])?])
    }
}

impl Differentiable for BatchNorm {
    fn forward_many(&mut self, inputs: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![self.forward(&inputs[0])?])
    }

    fn backward_many(&mut self, grads: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![self.backward(&grads[0])?])
    }
}
