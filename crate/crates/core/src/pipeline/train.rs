//! Minibatch training with cosine-annealed gradient descent and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use super::metrics::Metrics;
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::numeric::loss::{bce_logit_grad, bce_loss};
use crate::numeric::module::zero_grad;
use crate::numeric::optim::{cosine_lr, sgd_update, OptimizerState};

pub const DEFAULT_LR: f64 = 0.4637;
pub const DEFAULT_EPOCHS: usize = 584;
pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_PATIENCE: usize = 50;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without a validation-loss improvement before stopping; 0 disables.
    pub patience: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            patience: DEFAULT_PATIENCE,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Precondition(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size < 2 {
            return Err(Error::Precondition(format!(
                "batch size must be at least 2 for batch norm, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<C> {
    /// The best-validation-loss snapshot, or the final model without validation data.
    pub model: C,
    pub history: Vec<EpochRecord>,
    /// Epoch of the returned snapshot; `None` if no epoch ran.
    pub best_epoch: Option<usize>,
}

pub fn mean_loss<C: Classifier>(model: &C, data: &Dataset) -> Result<f64> {
    let p = model.predict_prob(&data.features, &data.embed)?;
    bce_loss(&p, &data.labels)
}

pub fn train<C: Classifier>(
    mut model: C,
    train_set: &Dataset,
    val_set: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<TrainOutcome<C>> {
    config.validate()?;
    if config.epochs > 0 && train_set.len() < 2 {
        return Err(Error::Precondition(format!(
            "training needs at least 2 rows, got {}",
            train_set.len()
        )));
    }
    model.set_training(true);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, C)> = None;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        let lr = cosine_lr(&OptimizerState {
            base_lr: config.lr,
            epoch,
            total_epochs: config.epochs,
        });
        order.shuffle(&mut rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch = train_set.subset(chunk);
            zero_grad(&mut model);
            let p = model.forward_prob(&batch.features, &batch.embed)?;
            let loss = bce_loss(&p, &batch.labels)?;
            if !loss.is_finite() || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch, batch: b, lr, loss });
            }
            let d = bce_logit_grad(&p, &batch.labels)?;
            model.backward_logits(&d)?;
            sgd_update(&mut model, lr)?;
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let train_loss = loss_sum / seen as f64;
        let val_loss = val_set.map(|v| mean_loss(&model, v)).transpose()?;
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_loss,
        });

        let score = val_loss.unwrap_or(train_loss);
        if !score.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: 0,
                lr,
                loss: score,
            });
        }
        if val_set.is_none() {
            best = Some((score, epoch, model.clone()));
            continue;
        }
        match &best {
            Some((b, _, _)) if score >= *b => {
                stale += 1;
                if config.patience > 0 && stale >= config.patience {
                    break;
                }
            }
            _ => {
                best = Some((score, epoch, model.clone()));
                stale = 0;
            }
        }
    }

    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, Some(e)),
        None => (model, None),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

pub fn evaluate<C: Classifier>(model: &C, data: &Dataset, threshold: f64) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let p = model.predict_prob(&data.features, &data.embed)?;
    Metrics::from_predictions(&p, &data.labels, threshold)
}
