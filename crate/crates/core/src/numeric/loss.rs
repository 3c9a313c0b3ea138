//! Binary cross-entropy.

use crate::error::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-12;

/// Mean of `-[y ln p + (1-y) ln(1-p)]`, with `p` clamped to `[1e-12, 1-1e-12]`.
pub fn bce_loss(prob: &[f64], label: &[f64]) -> Result<f64> {
    if prob.len() != label.len() {
        return Err(Error::Shape {
            op: "bce_loss",
            left: (prob.len(), 1),
            right: (label.len(), 1),
        });
    }
    if prob.is_empty() {
        return Err(Error::Empty("bce_loss batch"));
    }
    let total: f64 = prob
        .iter()
        .zip(label)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / prob.len() as f64)
}

/// Gradient of [`bce_loss`] with respect to the pre-sigmoid logits: `(p - y) / B`.
pub fn bce_logit_grad(prob: &[f64], label: &[f64]) -> Result<Vec<f64>> {
    if prob.len() != label.len() {
        return Err(Error::Shape {
            op: "bce_logit_grad",
            left: (prob.len(), 1),
            right: (label.len(), 1),
        });
    }
    let n = prob.len() as f64;
    Ok(prob.iter().zip(label).map(|(p, y)| (p - y) / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fair_coin() {
        assert_abs_diff_eq!(bce_loss(&[0.5], &[1.0]).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn confident_correct() {
        assert!(bce_loss(&[1.0 - 1e-12], &[1.0]).unwrap() < 1e-11);
        // exact 0 and 1 are clamped rather than producing infinities
        assert!(bce_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap().is_finite());
    }

    #[test]
    fn hand_evaluation() {
        let expected = 0.5 * (-(0.9f64).ln() - (0.8f64).ln());
        assert_abs_diff_eq!(bce_loss(&[0.9, 0.2], &[1.0, 0.0]).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.164252, epsilon = 1e-6);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(bce_loss(&[0.5], &[1.0, 0.0]), Err(Error::Shape { .. })));
    }
}
