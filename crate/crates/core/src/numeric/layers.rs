//! Linear and batch-norm layers plus the two activations.
//!
//! Layers cache what their backward pass needs during `forward` and
//! accumulate parameter gradients into [`Param::grad`] on `backward`.

use rand::Rng;

use super::module::{join, Module, Param, Tensor, TensorMut};
use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(kind: Activation, x: &Matrix) -> Matrix {
    match kind {
        Activation::Relu => x.map(|v| v.max(0.0)),
        Activation::Sigmoid => x.map(sigmoid),
    }
}

/// Gradient of ReLU given its *input* (or output; both share the sign pattern).
pub fn relu_backward(pre: &Matrix, dy: &Matrix) -> Result<Matrix> {
    pre.zip_map(dy, "relu_backward", |p, d| if p > 0.0 { d } else { 0.0 })
}

/// `Y = X·W + b`, with `W` stored `in x out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Option<Matrix>,
}

impl Linear {
    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for both weight and bias.
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let w = draw(fan_in * fan_out);
        let b = draw(fan_out);
        Self::from_parts(
            Matrix::from_vec(fan_in, fan_out, w).expect("sized above"),
            b,
        )
        .expect("sized above")
    }

    pub fn from_parts(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weight.cols() != bias.len() {
            return Err(Error::Shape {
                op: "linear bias",
                left: weight.shape(),
                right: (1, bias.len()),
            });
        }
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(Matrix::row_vector(&bias)),
            input: None,
        })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self::from_parts(Matrix::zeros(fan_in, fan_out), vec![0.0; fan_out]).expect("sized")
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn zero_weights(&mut self) {
        self.weight.value.fill(0.0);
        self.bias.value.fill(0.0);
    }

    /// Pure evaluation; does not touch the backward cache.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "linear_forward",
                left: x.shape(),
                right: self.weight.value.shape(),
            });
        }
        let mut y = x.matmul(&self.weight.value)?;
        let b = self.bias.value.data();
        for r in 0..y.rows() {
            for (v, bj) in y.row_mut(r).iter_mut().zip(b) {
                *v += bj;
            }
        }
        Ok(y)
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let y = self.apply(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Accumulates `dW += Xᵀ·dY`, `db += colsum(dY)` and returns `dX = dY·Wᵀ`.
    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let x = self.input.as_ref().ok_or(Error::NoForward("linear"))?;
        let dw = x.t_matmul(dy)?;
        self.weight.grad.add_assign(&dw)?;
        let db = Matrix::row_vector(&dy.col_sums());
        self.bias.grad.add_assign(&db)?;
        dy.matmul_t(&self.weight.value)
    }
}

impl Module for Linear {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>)) {
        f(&join(prefix, "weight"), Tensor::Param(&self.weight));
        f(&join(prefix, "bias"), Tensor::Param(&self.bias));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>)) {
        f(&join(prefix, "weight"), TensorMut::Param(&mut self.weight));
        f(&join(prefix, "bias"), TensorMut::Param(&mut self.bias));
    }
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
    training: bool,
}

/// Per-column batch normalization.
///
/// Training mode standardizes with the biased batch variance and folds the
/// unbiased variance into the running estimate (momentum-weighted).
/// Inference mode uses the running statistics only.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Matrix,
    pub running_var: Matrix,
    pub momentum: f64,
    pub epsilon: f64,
    pub training: bool,
    cache: Option<BnCache>,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Param::new(Matrix::ones(1, features)),
            beta: Param::new(Matrix::zeros(1, features)),
            running_mean: Matrix::zeros(1, features),
            running_var: Matrix::ones(1, features),
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
            training: true,
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.value.cols()
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let f = self.features();
        if x.cols() != f {
            return Err(Error::Shape {
                op: "batchnorm_forward",
                left: x.shape(),
                right: self.gamma.value.shape(),
            });
        }
        let b = x.rows();
        let (mean, var) = if self.training {
            if b < 2 {
                return Err(Error::BatchTooSmall(b));
            }
            let mean: Vec<f64> = x.col_sums().into_iter().map(|s| s / b as f64).collect();
            let mut var = vec![0.0; f];
            for r in 0..b {
                for ((v, xv), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                    let d = xv - m;
                    *v += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= b as f64);
            let unbias = b as f64 / (b as f64 - 1.0);
            for j in 0..f {
                let rm = self.running_mean.data()[j];
                let rv = self.running_var.data()[j];
                self.running_mean.data_mut()[j] = (1.0 - self.momentum) * rm + self.momentum * mean[j];
                self.running_var.data_mut()[j] =
                    (1.0 - self.momentum) * rv + self.momentum * var[j] * unbias;
            }
            (mean, var)
        } else {
            (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            )
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut xhat = Matrix::zeros(b, f);
        let mut y = Matrix::zeros(b, f);
        let g = self.gamma.value.data();
        let be = self.beta.value.data();
        for r in 0..b {
            let xr = x.row(r);
            for j in 0..f {
                let h = (xr[j] - mean[j]) * inv_std[j];
                xhat.set(r, j, h);
                y.set(r, j, g[j] * h + be[j]);
            }
        }
        self.cache = Some(BnCache {
            xhat,
            inv_std,
            training: self.training,
        });
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or(Error::NoForward("batch norm"))?;
        cache.xhat.ensure_same_shape(dy, "batchnorm_backward")?;
        let (b, f) = dy.shape();
        let g = self.gamma.value.data().to_vec();
        let mut sum_dy = vec![0.0; f];
        let mut sum_dy_xhat = vec![0.0; f];
        for r in 0..b {
            let dr = dy.row(r);
            let hr = cache.xhat.row(r);
            for j in 0..f {
                sum_dy[j] += dr[j];
                sum_dy_xhat[j] += dr[j] * hr[j];
            }
        }
        for j in 0..f {
            self.gamma.grad.data_mut()[j] += sum_dy_xhat[j];
            self.beta.grad.data_mut()[j] += sum_dy[j];
        }
        let mut dx = Matrix::zeros(b, f);
        if cache.training {
            let n = b as f64;
            for r in 0..b {
                let dr = dy.row(r);
                let hr = cache.xhat.row(r);
                for j in 0..f {
                    let v = g[j] * cache.inv_std[j] / n
                        * (n * dr[j] - sum_dy[j] - hr[j] * sum_dy_xhat[j]);
                    dx.set(r, j, v);
                }
            }
        } else {
            for r in 0..b {
                let dr = dy.row(r);
                for j in 0..f {
                    dx.set(r, j, dr[j] * g[j] * cache.inv_std[j]);
                }
            }
        }
        Ok(dx)
    }

    /// Identity transform in inference mode: running mean 0, running variance
    /// `1 - epsilon`, gamma 1, beta 0.
    pub fn set_identity(&mut self) {
        self.gamma.value.fill(1.0);
        self.beta.value.fill(0.0);
        self.running_mean.fill(0.0);
        self.running_var.fill(1.0 - self.epsilon);
    }
}

impl Module for BatchNorm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>)) {
        f(&join(prefix, "gamma"), Tensor::Param(&self.gamma));
        f(&join(prefix, "beta"), Tensor::Param(&self.beta));
        f(&join(prefix, "running_mean"), Tensor::Buffer(&self.running_mean));
        f(&join(prefix, "running_var"), Tensor::Buffer(&self.running_var));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>)) {
        f(&join(prefix, "gamma"), TensorMut::Param(&mut self.gamma));
        f(&join(prefix, "beta"), TensorMut::Param(&mut self.beta));
        f(
            &join(prefix, "running_mean"),
            TensorMut::Buffer(&mut self.running_mean),
        );
        f(
            &join(prefix, "running_var"),
            TensorMut::Buffer(&mut self.running_var),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn linear_identity_and_constant() {
        let mut id = Linear::from_parts(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        assert_eq!(id.forward(&m(&[&[3.0, -1.0]])).unwrap(), m(&[&[3.0, -1.0]]));

        let mut c = Linear::from_parts(Matrix::zeros(3, 2), vec![5.0, 5.0]).unwrap();
        let y = c.forward(&m(&[&[1.0, 2.0, 3.0], &[-4.0, 0.5, 9.0]])).unwrap();
        assert_eq!(y, m(&[&[5.0, 5.0], &[5.0, 5.0]]));
    }

    #[test]
    fn linear_hand_product() {
        let mut l = Linear::from_parts(m(&[&[1.0], &[1.0]]), vec![0.0]).unwrap();
        assert_eq!(l.forward(&m(&[&[2.0, 3.0]])).unwrap(), m(&[&[5.0]]));
    }

    #[test]
    fn linear_shape_error_names_operands() {
        let mut l = Linear::zeros(3, 2);
        let err = l.forward(&Matrix::zeros(1, 2)).unwrap_err();
        assert!(matches!(
            err,
            Error::Shape {
                op: "linear_forward",
                left: (1, 2),
                right: (3, 2)
            }
        ));
    }

    #[test]
    fn linear_backward_requires_forward() {
        let mut l = Linear::zeros(2, 2);
        assert!(matches!(
            l.backward(&Matrix::zeros(1, 2)),
            Err(Error::NoForward(_))
        ));
    }

    #[test]
    fn activations() {
        let x = Matrix::row_vector(&[-2.0, 0.0, 3.0]);
        assert_eq!(activation(Activation::Relu, &x).data(), &[0.0, 0.0, 3.0]);
        let s = activation(Activation::Sigmoid, &Matrix::row_vector(&[0.0, 2.0]));
        assert_eq!(s.data()[0], 0.5);
        // 1 / (1 + e^-2)
        assert_abs_diff_eq!(s.data()[1], 0.8807970779778823, epsilon = 1e-15);
    }

    #[test]
    fn sigmoid_strictly_inside_unit_interval() {
        for x in [-30.0, -5.0, 0.0, 5.0, 30.0] {
            let s = sigmoid(x);
            assert!(s > 0.0 && s < 1.0, "sigmoid({x}) = {s}");
        }
    }

    #[test]
    fn batchnorm_hand_standardization() {
        let mut bn = BatchNorm::new(1);
        bn.epsilon = 0.0;
        let y = bn.forward(&m(&[&[0.0], &[2.0]])).unwrap();
        assert_eq!(y, m(&[&[-1.0], &[1.0]]));
    }

    #[test]
    fn batchnorm_fixed_point() {
        let mut bn = BatchNorm::new(2);
        let x = m(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let y = bn.forward(&x).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-5);
        }
    }

    #[test]
    fn batchnorm_affine_collapse() {
        let mut bn = BatchNorm::new(1);
        bn.gamma.value.fill(0.0);
        bn.beta.value.fill(7.0);
        let y = bn.forward(&m(&[&[0.3], &[-9.0], &[4.0]])).unwrap();
        assert!(y.data().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn batchnorm_single_row_training_is_an_error() {
        let mut bn = BatchNorm::new(3);
        assert!(matches!(
            bn.forward(&Matrix::zeros(1, 3)),
            Err(Error::BatchTooSmall(1))
        ));
        bn.training = false;
        assert!(bn.forward(&Matrix::zeros(1, 3)).is_ok());
    }

    #[test]
    fn batchnorm_running_stats_and_inference() {
        let mut bn = BatchNorm::new(1);
        bn.forward(&m(&[&[1.0], &[3.0]])).unwrap();
        // mean 2, unbiased var 2
        assert_abs_diff_eq!(bn.running_mean.data()[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(bn.running_var.data()[0], 0.9 + 0.2, epsilon = 1e-15);
        bn.training = false;
        let before = bn.running_mean.clone();
        let y = bn.forward(&m(&[&[0.2]])).unwrap();
        assert_eq!(y.data()[0], 0.0);
        assert_eq!(bn.running_mean, before);
    }

    #[test]
    fn linear_init_within_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = Linear::new(16, 4, &mut rng);
        assert!(l
            .weight
            .value
            .data()
            .iter()
            .chain(l.bias.value.data())
            .all(|v| v.abs() <= 0.25));
    }
}
