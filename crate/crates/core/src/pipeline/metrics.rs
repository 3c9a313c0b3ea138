use crate::error::{Error, Result};

/// Confusion counts and the rates derived from them. A rate whose
/// denominator is zero is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Metrics {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Result<Self> {
        let total = tp + tn + fp + fn_;
        if total == 0 {
            return Err(Error::Empty("evaluation set"));
        }
        Ok(Self {
            tp,
            tn,
            fp,
            fn_,
            accuracy: (tp + tn) as f64 / total as f64,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
        })
    }

    /// Predicts positive iff `prob >= threshold`.
    pub fn from_predictions(probs: &[f64], labels: &[f64], threshold: f64) -> Result<Self> {
        if probs.len() != labels.len() {
            return Err(Error::Shape {
                op: "metrics",
                left: (probs.len(), 1),
                right: (labels.len(), 1),
            });
        }
        let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
        for (&p, &y) in probs.iter().zip(labels) {
            match (p >= threshold, y == 1.0) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
            }
        }
        Self::from_counts(tp, tn, fp, fn_)
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn rates(&self) -> [Option<f64>; 4] {
        [Some(self.accuracy), self.precision, self.recall, self.specificity]
    }

    pub fn all_defined(&self) -> bool {
        self.rates().iter().all(Option::is_some)
    }
}

pub const RATE_NAMES: [&str; 4] = ["accuracy", "precision", "recall", "specificity"];

/// Mean and sample standard deviation of each rate across folds, over the
/// folds where that rate is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: [Option<f64>; 4],
    pub std: [Option<f64>; 4],
}

impl MetricSummary {
    pub fn from_folds(folds: &[Metrics]) -> Self {
        let mut mean = [None; 4];
        let mut std = [None; 4];
        for k in 0..4 {
            let vals: Vec<f64> = folds.iter().filter_map(|m| m.rates()[k]).collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let mu = vals.iter().sum::<f64>() / n;
            mean[k] = Some(mu);
            std[k] = if vals.len() > 1 {
                Some((vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
            } else {
                Some(0.0)
            };
        }
        Self { mean, std }
    }

    pub fn accuracy(&self) -> f64 {
        self.mean[0].unwrap_or(f64::NAN)
    }
}
