use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::numeric::module::{Module, Tensor, TensorMut};
use crate::numeric::{Linear, Matrix};

/// One linear layer over `[features | embedding]` followed by a sigmoid.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub linear: Linear,
    feature_dim: usize,
    embed_dim: usize,
}

impl LogisticModel {
    pub fn new(feature_dim: usize, embed_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            linear: Linear::new(feature_dim + embed_dim, 1, &mut rng),
            feature_dim,
            embed_dim,
        }
    }

    fn inputs(&self, x: &Matrix, embed: &Matrix) -> Result<Matrix> {
        if x.cols() != self.feature_dim {
            return Err(Error::Width {
                what: "feature",
                expected: self.feature_dim,
                found: x.cols(),
            });
        }
        if embed.cols() != self.embed_dim {
            return Err(Error::Width {
                what: "embedding",
                expected: self.embed_dim,
                found: embed.cols(),
            });
        }
        x.hcat(embed)
    }
}

impl Module for LogisticModel {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>)) {
        self.linear.visit(prefix, f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>)) {
        self.linear.visit_mut(prefix, f);
    }
}

impl Classifier for LogisticModel {
    fn set_training(&mut self, _training: bool) {}

    fn forward_logits(&mut self, x: &Matrix, embed: &Matrix) -> Result<Vec<f64>> {
        let input = self.inputs(x, embed)?;
        Ok(self.linear.forward(&input)?.into_vec())
    }

    fn backward_logits(&mut self, d_logits: &[f64]) -> Result<()> {
        let d = Matrix::from_vec(d_logits.len(), 1, d_logits.to_vec())?;
        self.linear.backward(&d)?;
        Ok(())
    }

    fn predict_prob(&self, x: &Matrix, embed: &Matrix) -> Result<Vec<f64>> {
        let input = self.inputs(x, embed)?;
        Ok(self
            .linear
            .apply(&input)?
            .into_vec()
            .into_iter()
            .map(crate::numeric::sigmoid)
            .collect())
    }
}
