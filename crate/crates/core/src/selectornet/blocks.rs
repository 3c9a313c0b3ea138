//! Building blocks of a SelectorNet step: the Split gate, residual blocks,
//! the two-stage selector block and the fusion attention block.

use rand::Rng;

use super::config::{AttentionScope, FabVariant, ResBlockVariant, SelectorVariant};
use crate::error::{Error, Result};
use crate::numeric::gradcheck::Differentiable;
use crate::numeric::layers::relu_backward;
use crate::numeric::module::{join, Module, Tensor, TensorMut};
use crate::numeric::{sigmoid, BatchNorm, Linear, Matrix};

/// Gate over ReLU outputs: positive entries map to `sigmoid(z) ∈ (0.5, 1)`,
/// zeros stay zero.
pub fn split(z: &Matrix) -> Result<Matrix> {
    if let Some(v) = z.data().iter().find(|v| **v < 0.0 || v.is_nan()) {
        return Err(Error::Precondition(format!(
            "split expects ReLU output (>= 0), found {v}"
        )));
    }
    Ok(z.map(|v| if v > 0.0 { sigmoid(v) } else { 0.0 }))
}

#[derive(Debug, Clone)]
pub struct ResBlock {
    variant: ResBlockVariant,
    pub(crate) l1: Linear,
    pub(crate) l2: Option<Linear>,
    pub(crate) bn: Option<BatchNorm>,
    hidden: Option<Matrix>,
}

impl ResBlock {
    pub fn new<R: Rng + ?Sized>(variant: ResBlockVariant, features: usize, rng: &mut R) -> Self {
        match variant {
            ResBlockVariant::Residual => Self {
                variant,
                l1: Linear::new(features, features, rng),
                l2: Some(Linear::new(features, features, rng)),
                bn: Some(BatchNorm::new(features)),
                hidden: None,
            },
            ResBlockVariant::LinearRelu => Self {
                variant,
                l1: Linear::new(features, features, rng),
                l2: None,
                bn: None,
                hidden: None,
            },
        }
    }

    pub fn variant(&self) -> ResBlockVariant {
        self.variant
    }

    pub fn batch_norm_mut(&mut self) -> Option<&mut BatchNorm> {
        self.bn.as_mut()
    }

    pub fn set_training(&mut self, training: bool) {
        if let Some(bn) = &mut self.bn {
            bn.training = training;
        }
    }

    pub fn zero_linears(&mut self) {
        self.l1.zero_weights();
        if let Some(l2) = &mut self.l2 {
            l2.zero_weights();
        }
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        match (&mut self.l2, &mut self.bn) {
            (Some(l2), Some(bn)) => {
                let h = self.l1.forward(&bn.forward(x)?)?;
                let out = x.add(&l2.forward(&h.map(|v| v.max(0.0)))?)?;
                self.hidden = Some(h);
                Ok(out)
            }
            _ => {
                let h = self.l1.forward(x)?;
                let out = h.map(|v| v.max(0.0));
                self.hidden = Some(h);
                Ok(out)
            }
        }
    }

    pub fn backward(&mut self, dy: &Matrix) -> Result<Matrix> {
        let pre = self.hidden.as_ref().ok_or(Error::NoForward("res block"))?;
        match (&mut self.l2, &mut self.bn) {
            (Some(l2), Some(bn)) => {
                let dh = relu_backward(pre, &l2.backward(dy)?)?;
                let mut dx = bn.backward(&self.l1.backward(&dh)?)?;
                dx.add_assign(dy)?;
                Ok(dx)
            }
            _ => {
                let dh = relu_backward(pre, dy)?;
                self.l1.backward(&dh)
            }
        }
    }
}

impl Module for ResBlock {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>)) {
        self.l1.visit(&join(prefix, "l1"), f);
        if let Some(l2) = &self.l2 {
            l2.visit(&join(prefix, "l2"), f);
        }
        if let Some(bn) = &self.bn {
            bn.visit(&join(prefix, "bn"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>)) {
        self.l1.visit_mut(&join(prefix, "l1"), f);
        if let Some(l2) = &mut self.l2 {
            l2.visit_mut(&join(prefix, "l2"), f);
        }
        if let Some(bn) = &mut self.bn {
            bn.visit_mut(&join(prefix, "bn"), f);
        }
    }
}

impl Differentiable for ResBlock {
    fn forward_many(&mut self, inputs: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![self.forward(&inputs[0])?])
    }

    fn backward_many(&mut self, grads: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![self.backward(&grads[0])?])
    }
}

#[derive(Debug, Clone)]
struct SelectorCache {
    x: Matrix,
    s2: Matrix,
    s1: Matrix,
    /// Pre-activation of the variant's linear layer, if any.
    hidden: Option<Matrix>,
    stage1: Option<Matrix>,
}

/// Output of [`SelectorBlock::forward`].
#[derive(Debug, Clone)]
pub struct Selection {
    pub output: Matrix,
    /// Stage-1 selection matrix; all zeros for variants without stage 1.
    pub s1: Matrix,
}

#[derive(Debug, Clone)]
pub struct SelectorBlock {
    variant: SelectorVariant,
    pub(crate) linear: Option<Linear>,
    cache: Option<SelectorCache>,
}

impl SelectorBlock {
    pub fn new<R: Rng + ?Sized>(variant: SelectorVariant, features: usize, rng: &mut R) -> Self {
        let linear = match variant {
            SelectorVariant::Full
            | SelectorVariant::Stage1Only
            | SelectorVariant::Add
            | SelectorVariant::Hadamard => Some(Linear::new(features, features, rng)),
            SelectorVariant::Concat => Some(Linear::new(2 * features, features, rng)),
            SelectorVariant::Stage2Only => None,
        };
        Self {
            variant,
            linear,
            cache: None,
        }
    }

    pub fn variant(&self) -> SelectorVariant {
        self.variant
    }

    pub fn linear_mut(&mut self) -> Option<&mut Linear> {
        self.linear.as_mut()
    }

    pub fn forward(&mut self, x: &Matrix, s2: &Matrix) -> Result<Selection> {
        x.ensure_same_shape(s2, "selector_block")?;
        let zeros = || Matrix::zeros(x.rows(), x.cols());
        let (output, s1, hidden, stage1) = match self.variant {
            SelectorVariant::Full | SelectorVariant::Stage1Only => {
                let lin = self.linear.as_mut().expect("stage-1 linear");
                let h = lin.forward(x)?;
                let s1 = split(&h.map(|v| v.max(0.0)))?;
                let stage1 = x.zip_map(&s1, "stage1", |a, s| a * (1.0 + s))?;
                let output = if self.variant == SelectorVariant::Full {
                    stage1.hadamard(s2)?
                } else {
                    stage1.clone()
                };
                (output, s1, Some(h), Some(stage1))
            }
            SelectorVariant::Stage2Only => (x.hadamard(s2)?, zeros(), None, None),
            SelectorVariant::Concat | SelectorVariant::Add | SelectorVariant::Hadamard => {
                let combined = match self.variant {
                    SelectorVariant::Concat => x.hcat(s2)?,
                    SelectorVariant::Add => x.add(s2)?,
                    _ => x.hadamard(s2)?,
                };
                let lin = self.linear.as_mut().expect("combine linear");
                let h = lin.forward(&combined)?;
                (h.map(|v| v.max(0.0)), zeros(), Some(h), None)
            }
        };
        self.cache = Some(SelectorCache {
            x: x.clone(),
            s2: s2.clone(),
            s1: s1.clone(),
            hidden,
            stage1,
        });
        Ok(Selection { output, s1 })
    }

    /// Returns `(dX, dS2)`.
    pub fn backward(&mut self, dout: &Matrix) -> Result<(Matrix, Matrix)> {
        let c = self.cache.as_ref().ok_or(Error::NoForward("selector block"))?;
        match self.variant {
            SelectorVariant::Full | SelectorVariant::Stage1Only => {
                let stage1 = c.stage1.as_ref().expect("cached");
                let h = c.hidden.as_ref().expect("cached");
                let (dstage1, ds2) = if self.variant == SelectorVariant::Full {
                    (dout.hadamard(&c.s2)?, dout.hadamard(stage1)?)
                } else {
                    (dout.clone(), Matrix::zeros(dout.rows(), dout.cols()))
                };
                let mut dx = dstage1.zip_map(&c.s1, "stage1_backward", |d, s| d * (1.0 + s))?;
                let ds1 = dstage1.hadamard(&c.x)?;
                // d split(relu(h)) / dh = s (1 - s) where h > 0, else 0
                let mut dh = Matrix::zeros(h.rows(), h.cols());
                for ((o, (&hv, &s)), &g) in dh
                    .data_mut()
                    .iter_mut()
                    .zip(h.data().iter().zip(c.s1.data()))
                    .zip(ds1.data())
                {
                    if hv > 0.0 {
                        *o = g * s * (1.0 - s);
                    }
                }
                let lin = self.linear.as_mut().expect("stage-1 linear");
                dx.add_assign(&lin.backward(&dh)?)?;
                Ok((dx, ds2))
            }
            SelectorVariant::Stage2Only => Ok((dout.hadamard(&c.s2)?, dout.hadamard(&c.x)?)),
            SelectorVariant::Concat | SelectorVariant::Add | SelectorVariant::Hadamard => {
                let h = c.hidden.as_ref().expect("cached");
                let dh = relu_backward(h, dout)?;
                let lin = self.linear.as_mut().expect("combine linear");
                let dc = lin.backward(&dh)?;
                match self.variant {
                    SelectorVariant::Concat => Ok(dc.split_cols(c.x.cols())),
                    SelectorVariant::Add => Ok((dc.clone(), dc)),
                    _ => Ok((dc.hadamard(&c.s2)?, dc.hadamard(&c.x)?)),
                }
            }
        }
    }
}

impl Module for SelectorBlock {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>)) {
        if let Some(l) = &self.linear {
            l.visit(&join(prefix, "linear"), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>)) {
        if let Some(l) = &mut self.linear {
            l.visit_mut(&join(prefix, "linear"), f);
        }
    }
}

impl Differentiable for SelectorBlock {
    fn forward_many(&mut self, inputs: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(vec![self.forward(&inputs[0], &inputs[1])?.output])
    }

    fn backward_many(&mut self, grads: &[Matrix]) -> Result<Vec<Matrix>> {
        let (dx, ds2) = self.backward(&grads[0])?;
        Ok(vec![dx, ds2])
    }
}

#[derive(Debug, Clone)]
pub struct AttentionFab {
    pub(crate) q: Linear,
    pub(crate) k: Linear,
    pub(crate) dec: Linear,
    pub(crate) step: Linear,
    pub(crate) bn_dec: BatchNorm,
    pub(crate) bn_step: BatchNorm,
    scope: AttentionScope,
}

#[derive(Debug, Clone)]
enum FabLayers {
    Attention(Box<AttentionFab>),
    ConcatLinearRelu(Linear),
}

#[derive(Debug, Clone)]
enum FabCache {
    Attention {
        x: Matrix,
        x_step: Matrix,
        q: Matrix,
        k: Matrix,
        attn: Matrix,
        /// Per-row `x·q` and `x_step·q` for the per-sample scope.
        sx: Vec<f64>,
        ss: Vec<f64>,
    },
    Concat {
        hidden: Matrix,
        split_at: usize,
    },
}

/// Fusion attention block.
///
/// With `Q = Linear_q(x)` and `K = Linear_k(x_step)`, each sample gets the
/// `F x F` matrix `A_b = q_bᵀ·k_b`, shared by both value paths:
///
/// - `x_dec = BN_dec(x + Linear_dec(x·A))`
/// - `x_step' = BN_step(x_step + Linear_step(x_step·A))`
///
/// No softmax is applied. [`AttentionScope::Batch`] instead uses the pooled
/// `A = (1/B)·Qᵀ·K` for every row, which is also what
/// [`FusionAttention::last_attention`] reports in both scopes.
#[derive(Debug, Clone)]
pub struct FusionAttention {
    layers: FabLayers,
    cache: Option<FabCache>,
}

impl FusionAttention {
    pub fn new<R: Rng + ?Sized>(variant: FabVariant, features: usize, rng: &mut R) -> Self {
        Self::with_scope(variant, AttentionScope::Sample, features, rng)
    }

    pub fn with_scope<R: Rng + ?Sized>(
        variant: FabVariant,
        scope: AttentionScope,
        features: usize,
        rng: &mut R,
    ) -> Self {
        let layers = match variant {
            FabVariant::Attention => FabLayers::Attention(Box::new(AttentionFab {
                q: Linear::new(features, features, rng),
                k: Linear::new(features, features, rng),
                dec: Linear::new(features, features, rng),
                step: Linear::new(features, features, rng),
                bn_dec: BatchNorm::new(features),
                bn_step: BatchNorm::new(features),
                scope,
            })),
            FabVariant::ConcatLinearRelu => {
                FabLayers::ConcatLinearRelu(Linear::new(2 * features, features, rng))
            }
        };
        Self {
            layers,
            cache: None,
        }
    }

    pub fn variant(&self) -> FabVariant {
        match self.layers {
            FabLayers::Attention(_) => FabVariant::Attention,
            FabLayers::ConcatLinearRelu(_) => FabVariant::ConcatLinearRelu,
        }
    }

    pub fn attention_layers_mut(&mut self) -> Option<&mut AttentionFab> {
        match &mut self.layers {
            FabLayers::Attention(a) => Some(a),
            FabLayers::ConcatLinearRelu(_) => None,
        }
    }

    /// Batch mean of the per-sample `F x F` attention matrices from the last
    /// forward pass.
    pub fn last_attention(&self) -> Option<&Matrix> {
        match &self.cache {
            Some(FabCache::Attention { attn, .. }) => Some(attn),
            _ => None,
        }
    }

    pub fn set_training(&mut self, training: bool) {
        if let FabLayers::Attention(a) = &mut self.layers {
            a.bn_dec.training = training;
            a.bn_step.training = training;
        }
    }

    pub fn zero_linears(&mut self) {
        match &mut self.layers {
            FabLayers::Attention(a) => {
                for l in [&mut a.q, &mut a.k, &mut a.dec, &mut a.step] {
                    l.zero_weights();
                }
            }
            FabLayers::ConcatLinearRelu(l) => l.zero_weights(),
        }
    }

    /// Returns `(x_dec_raw, x_step_next)`.
    pub fn forward(&mut self, x: &Matrix, x_step: &Matrix) -> Result<(Matrix, Matrix)> {
        x.ensure_same_shape(x_step, "fusion_attention")?;
        let b = x.rows();
        if b == 0 {
            return Err(Error::Empty("fusion attention batch"));
        }
        match &mut self.layers {
            FabLayers::Attention(a) => {
                let q = a.q.forward(x)?;
                let k = a.k.forward(x_step)?;
                let attn = q.t_matmul(&k)?.scale(1.0 / b as f64);
                let (vx, vs, sx, ss) = match a.scope {
                    AttentionScope::Batch => (x.matmul(&attn)?, x_step.matmul(&attn)?, Vec::new(), Vec::new()),
                    AttentionScope::Sample => {
                        // x_b·(q_bᵀ k_b) = (x_b·q_b) k_b
                        let sx = row_dots(x, &q);
                        let ss = row_dots(x_step, &q);
                        (scale_rows(&k, &sx), scale_rows(&k, &ss), sx, ss)
                    }
                };
                let dec = a.bn_dec.forward(&x.add(&a.dec.forward(&vx)?)?)?;
                let next = a.bn_step.forward(&x_step.add(&a.step.forward(&vs)?)?)?;
                self.cache = Some(FabCache::Attention {
                    x: x.clone(),
                    x_step: x_step.clone(),
                    q,
                    k,
                    attn,
                    sx,
                    ss,
                });
                Ok((dec, next))
            }
            FabLayers::ConcatLinearRelu(l) => {
                let hidden = l.forward(&x.hcat(x_step)?)?;
                let y = hidden.map(|v| v.max(0.0));
                self.cache = Some(FabCache::Concat {
                    hidden,
                    split_at: x.cols(),
                });
                Ok((y.clone(), y))
            }
        }
    }

    /// Returns `(dx, dx_step)`.
    pub fn backward(&mut self, d_dec: &Matrix, d_next: &Matrix) -> Result<(Matrix, Matrix)> {
        let cache = self.cache.as_ref().ok_or(Error::NoForward("fusion attention"))?;
        match (&mut self.layers, cache) {
            (
                FabLayers::Attention(a),
                FabCache::Attention {
                    x,
                    x_step,
                    q,
                    k,
                    attn,
                    sx,
                    ss,
                },
            ) => {
                let du_dec = a.bn_dec.backward(d_dec)?;
                let du_step = a.bn_step.backward(d_next)?;
                let dvx = a.dec.backward(&du_dec)?;
                let dvs = a.step.backward(&du_step)?;
                let mut dx = du_dec;
                let mut ds = du_step;

                let (dq, dk) = match a.scope {
                    AttentionScope::Batch => {
                        let b = x.rows() as f64;
                        dx.add_assign(&dvx.matmul_t(attn)?)?;
                        ds.add_assign(&dvs.matmul_t(attn)?)?;
                        let mut dattn = x.t_matmul(&dvx)?;
                        dattn.add_assign(&x_step.t_matmul(&dvs)?)?;
                        (k.matmul_t(&dattn)?.scale(1.0 / b), q.matmul(&dattn)?.scale(1.0 / b))
                    }
                    AttentionScope::Sample => {
                        let dsx = row_dots(&dvx, k);
                        let dss = row_dots(&dvs, k);
                        dx.add_assign(&scale_rows(q, &dsx))?;
                        ds.add_assign(&scale_rows(q, &dss))?;
                        let mut dq = scale_rows(x, &dsx);
                        dq.add_assign(&scale_rows(x_step, &dss))?;
                        let mut dk = scale_rows(&dvx, sx);
                        dk.add_assign(&scale_rows(&dvs, ss))?;
                        (dq, dk)
                    }
                };
                dx.add_assign(&a.q.backward(&dq)?)?;
                ds.add_assign(&a.k.backward(&dk)?)?;
                Ok((dx, ds))
            }
            (FabLayers::ConcatLinearRelu(l), FabCache::Concat { hidden, split_at }) => {
                let dy = d_dec.add(d_next)?;
                let dh = relu_backward(hidden, &dy)?;
                Ok(l.backward(&dh)?.split_cols(*split_at))
            }
            _ => Err(Error::NoForward("fusion attention")),
        }
    }
}

fn row_dots(a: &Matrix, b: &Matrix) -> Vec<f64> {
    (0..a.rows())
        .map(|r| a.row(r).iter().zip(b.row(r)).map(|(x, y)| x * y).sum())
        .collect()
}

fn scale_rows(m: &Matrix, s: &[f64]) -> Matrix {
    let mut out = m.clone();
    for (r, k) in s.iter().enumerate() {
        out.row_mut(r).iter_mut().for_each(|v| *v *= k);
    }
    out
}

impl Module for FusionAttention {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>)) {
        match &self.layers {
            FabLayers::Attention(a) => {
                a.q.visit(&join(prefix, "q"), f);
                a.k.visit(&join(prefix, "k"), f);
                a.dec.visit(&join(prefix, "dec"), f);
                a.step.visit(&join(prefix, "step"), f);
                a.bn_dec.visit(&join(prefix, "bn_dec"), f);
                a.bn_step.visit(&join(prefix, "bn_step"), f);
            }
            FabLayers::ConcatLinearRelu(l) => l.visit(&join(prefix, "concat"), f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>)) {
        match &mut self.layers {
            FabLayers::Attention(a) => {
                a.q.visit_mut(&join(prefix, "q"), f);
                a.k.visit_mut(&join(prefix, "k"), f);
                a.dec.visit_mut(&join(prefix, "dec"), f);
                a.step.visit_mut(&join(prefix, "step"), f);
                a.bn_dec.visit_mut(&join(prefix, "bn_dec"), f);
                a.bn_step.visit_mut(&join(prefix, "bn_step"), f);
            }
            FabLayers::ConcatLinearRelu(l) => l.visit_mut(&join(prefix, "concat"), f),
        }
    }
}

impl Differentiable for FusionAttention {
    fn forward_many(&mut self, inputs: &[Matrix]) -> Result<Vec<Matrix>> {
        let (a, b) = self.forward(&inputs[0], &inputs[1])?;
        Ok(vec![a, b])
    }

    fn backward_many(&mut self, grads: &[Matrix]) -> Result<Vec<Matrix>> {
        let (a, b) = self.backward(&grads[0], &grads[1])?;
        Ok(vec![a, b])
    }
}
