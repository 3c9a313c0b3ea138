//! The interface the training loop drives, implemented by SelectorNet and the
//! logistic reference model.

use crate::error::Result;
use crate::numeric::gradcheck::GradCheck;
use crate::numeric::loss::{bce_logit_grad, bce_loss};
use crate::numeric::module::{flat_grads, flat_params, set_flat_params, zero_grad, Module};
use crate::numeric::{sigmoid, Matrix};

pub trait Classifier: Module + Clone + Send + Sync {
    fn set_training(&mut self, training: bool);

    /// Pre-sigmoid scores, one per row. Caches what backward needs.
    fn forward_logits(&mut self, x: &Matrix, embed: &Matrix) -> Result<Vec<f64>>;

    /// Accumulates parameter gradients for `dL/dlogit` of the last forward batch.
    fn backward_logits(&mut self, d_logits: &[f64]) -> Result<()>;

    fn forward_prob(&mut self, x: &Matrix, embed: &Matrix) -> Result<Vec<f64>> {
        Ok(self
            .forward_logits(x, embed)?
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Probabilities with batch norms in inference mode, on a scratch copy.
    fn predict_prob(&self, x: &Matrix, embed: &Matrix) -> Result<Vec<f64>> {
        let mut m = self.clone();
        m.set_training(false);
        m.forward_prob(x, embed)
    }
}

/// Mean binary cross-entropy of a classifier over one fixed batch, exposed to
/// the finite-difference oracle. The model keeps whatever batch-norm mode it
/// was given, for both the analytic and the numeric evaluation.
pub struct BatchObjective<C> {
    pub model: C,
    pub x: Matrix,
    pub embed: Matrix,
    pub labels: Vec<f64>,
}

impl<C: Classifier> GradCheck for BatchObjective<C> {
    fn params(&self) -> Vec<f64> {
        flat_params(&self.model)
    }

    fn set_params(&mut self, values: &[f64]) -> Result<()> {
        set_flat_params(&mut self.model, values)
    }

    fn loss(&mut self) -> Result<f64> {
        let p = self.model.forward_prob(&self.x, &self.embed)?;
        bce_loss(&p, &self.labels)
    }

    fn gradient(&mut self) -> Result<Vec<f64>> {
        zero_grad(&mut self.model);
        let p = self.model.forward_prob(&self.x, &self.embed)?;
        let d = bce_logit_grad(&p, &self.labels)?;
        self.model.backward_logits(&d)?;
        Ok(flat_grads(&self.model))
    }
}
