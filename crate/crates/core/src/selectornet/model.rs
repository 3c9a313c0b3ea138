//! Step-chained SelectorNet.
//!
//! Every step sees the original input `X` and the previous step's `x_step`
//! (all ones for the first step):
//!
//! ```text
//! S2        = ResBlock(x_step)
//! sel       = SelectorBlock(X, S2)
//! x         = ResBlock(sel)
//! x_dec_raw, x_step' = FAB(x, x_step)
//! x_dec     = ResBlock(ResBlock(x_dec_raw))
//! ```
//!
//! The decision features of all steps are summed, concatenated with the
//! external image embedding and mapped to a probability by a single linear
//! layer followed by a sigmoid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blocks::{FusionAttention, ResBlock, SelectorBlock};
use super::config::{FabStepSource, SelectorNetConfig};
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::numeric::gradcheck::Differentiable;
use crate::numeric::module::{join, Module, Tensor, TensorMut};
use crate::numeric::{sigmoid, Linear, Matrix};

/// Per-step tensors used by the attention report.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub s1: Matrix,
    pub s2: Matrix,
    pub x_step_in: Matrix,
    pub x_step_out: Matrix,
    /// Exactly the tensor accumulated into the decision sum.
    pub x_dec: Matrix,
}

#[derive(Debug, Clone)]
pub struct Step {
    pub(crate) x_step_block: ResBlock,
    pub(crate) selector: SelectorBlock,
    pub(crate) post: ResBlock,
    pub(crate) fab: FusionAttention,
    pub(crate) dec1: ResBlock,
    pub(crate) dec2: ResBlock,
    fab_source: FabStepSource,
}

impl Step {
    fn new(config: &SelectorNetConfig, rng: &mut ChaCha8Rng) -> Self {
        let f = config.feature_dim;
        Self {
            x_step_block: ResBlock::new(config.resblock, f, rng),
            selector: SelectorBlock::new(config.selector, f, rng),
            post: ResBlock::new(config.resblock, f, rng),
            fab: FusionAttention::with_scope(config.fab, config.attention_scope, f, rng),
            dec1: ResBlock::new(config.resblock, f, rng),
            dec2: ResBlock::new(config.resblock, f, rng),
            fab_source: config.fab_step_source,
        }
    }

    pub fn fab(&self) -> &FusionAttention {
        &self.fab
    }

    fn set_training(&mut self, training: bool) {
        for r in [
            &mut self.x_step_block,
            &mut self.post,
            &mut self.dec1,
            &mut self.dec2,
        ] {
            r.set_training(training);
        }
        self.fab.set_training(training);
    }

    fn zero_inner_linears(&mut self) {
        for r in [
            &mut self.x_step_block,
            &mut self.post,
            &mut self.dec1,
            &mut self.dec2,
        ] {
            r.zero_linears();
        }
        if let Some(l) = self.selector.linear_mut() {
            l.zero_weights();
        }
        self.fab.zero_linears();
    }

    /// Returns `(x_dec, x_step_next, trace)`.
    pub fn forward(&mut self, x: &Matrix, x_step: &Matrix) -> Result<(Matrix, Matrix, StepTrace)> {
        let s2 = self.x_step_block.forward(x_step)?;
        let selection = self.selector.forward(x, &s2)?;
        let h = self.post.forward(&selection.output)?;
        let fab_in = match self.fab_source {
            FabStepSource::Raw => x_step,
            FabStepSource::Processed => &s2,
        };
        let (dec_raw, next) = self.fab.forward(&h, fab_in)?;
        let x_dec = self.dec2.forward(&self.dec1.forward(&dec_raw)?)?;
        let trace = StepTrace {
            s1: selection.s1,
            s2,
            x_step_in: x_step.clone(),
            x_step_out: next.clone(),
            x_dec: x_dec.clone(),
        };
        Ok((x_dec, next, trace))
    }

    /// Returns `(dX, dx_step)`.
    pub fn backward(&mut self, d_dec: &Matrix, d_next: &Matrix) -> Result<(Matrix, Matrix)> {
        let d_dec_raw = self.dec1.backward(&self.dec2.backward(d_dec)?)?;
        let (dh, d_fab_in) = self.fab.backward(&d_dec_raw, d_next)?;
        let d_sel = self.post.backward(&dh)?;
        let (dx, mut ds2) = self.selector.backward(&d_sel)?;
        if self.fab_source == FabStepSource::Processed {
            ds2.add_assign(&d_fab_in)?;
        }
        let mut d_step = self.x_step_block.backward(&ds2)?;
        if self.fab_source == FabStepSource::Raw {
            d_step.add_assign(&d_fab_in)?;
        }
        Ok((dx, d_step))
    }
}

impl Module for Step {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>)) {
        self.x_step_block.visit(&join(prefix, "x_step_block"), f);
        self.selector.visit(&join(prefix, "selector"), f);
        self.post.visit(&join(prefix, "post"), f);
        self.fab.visit(&join(prefix, "fab"), f);
        self.dec1.visit(&join(prefix, "dec1"), f);
        self.dec2.visit(&join(prefix, "dec2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>)) {
        self.x_step_block.visit_mut(&join(prefix, "x_step_block"), f);
        self.selector.visit_mut(&join(prefix, "selector"), f);
        self.post.visit_mut(&join(prefix, "post"), f);
        self.fab.visit_mut(&join(prefix, "fab"), f);
        self.dec1.visit_mut(&join(prefix, "dec1"), f);
        self.dec2.visit_mut(&join(prefix, "dec2"), f);
    }
}

impl Differentiable for Step {
    fn forward_many(&mut self, inputs: &[Matrix]) -> Result<Vec<Matrix>> {
        let (d, n, _) = self.forward(&inputs[0], &inputs[1])?;
        Ok(vec![d, n])
    }

    fn backward_many(&mut self, grads: &[Matrix]) -> Result<Vec<Matrix>> {
        let (dx, ds) = self.backward(&grads[0], &grads[1])?;
        Ok(vec![dx, ds])
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub prob: Vec<f64>,
    pub traces: Vec<StepTrace>,
}

#[derive(Debug, Clone)]
pub struct SelectorNet {
    config: SelectorNetConfig,
    pub(crate) steps: Vec<Step>,
    pub(crate) head: Linear,
    forward_rows: Option<usize>,
}

impl SelectorNet {
    /// Initializes all parameters from `config.seed`.
    pub fn new(config: SelectorNetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let steps = (0..config.steps).map(|_| Step::new(&config, &mut rng)).collect();
        let head = Linear::new(config.feature_dim + config.embed_dim, 1, &mut rng);
        Ok(Self {
            config,
            steps,
            head,
            forward_rows: None,
        })
    }

    pub fn config(&self) -> &SelectorNetConfig {
        &self.config
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn steps_mut(&mut self) -> &mut [Step] {
        &mut self.steps
    }

    pub fn head_mut(&mut self) -> &mut Linear {
        &mut self.head
    }

    pub fn set_training(&mut self, training: bool) {
        self.steps.iter_mut().for_each(|s| s.set_training(training));
    }

    /// Zeroes every linear inside the steps (selector, residual blocks and
    /// fusion attention), leaving only shortcuts, batch norms and the head.
    pub fn zero_inner_linears(&mut self) {
        self.steps.iter_mut().for_each(Step::zero_inner_linears);
    }

    fn check_inputs(&self, x: &Matrix, embed: &Matrix) -> Result<()> {
        if x.cols() != self.config.feature_dim {
            return Err(Error::Width {
                what: "feature",
                expected: self.config.feature_dim,
                found: x.cols(),
            });
        }
        if embed.cols() != self.config.embed_dim {
            return Err(Error::Width {
                what: "embedding",
                expected: self.config.embed_dim,
                found: embed.cols(),
            });
        }
        if embed.rows() != x.rows() {
            return Err(Error::Shape {
                op: "selectornet_forward",
                left: x.shape(),
                right: embed.shape(),
            });
        }
        if x.rows() == 0 {
            return Err(Error::Empty("selectornet batch"));
        }
        Ok(())
    }

    /// Returns logits and per-step traces.
    fn forward_logits(&mut self, x: &Matrix, embed: &Matrix) -> Result<(Vec<f64>, Vec<StepTrace>)> {
        self.check_inputs(x, embed)?;
        let (b, f) = x.shape();
        let mut x_step = Matrix::ones(b, f);
        let mut decision = Matrix::zeros(b, f);
        let mut traces = Vec::with_capacity(self.steps.len());
        for step in &mut self.steps {
            let (x_dec, next, trace) = step.forward(x, &x_step)?;
            decision.add_assign(&x_dec)?;
            x_step = next;
            traces.push(trace);
        }
        let logits = self.head.forward(&decision.hcat(embed)?)?.into_vec();
        self.forward_rows = Some(b);
        Ok((logits, traces))
    }

    pub fn forward(&mut self, x: &Matrix, embed: &Matrix) -> Result<ForwardOutput> {
        let (logits, traces) = self.forward_logits(x, embed)?;
        Ok(ForwardOutput {
            prob: logits.into_iter().map(sigmoid).collect(),
            traces,
        })
    }

    /// Inference on a copy with batch norms in inference mode; `self` is not touched.
    pub fn predict(&self, x: &Matrix, embed: &Matrix) -> Result<ForwardOutput> {
        let mut m = self.clone();
        m.set_training(false);
        m.forward(x, embed)
    }

    /// Backpropagates `dL/dlogit` (one entry per row of the last forward batch).
    /// Accumulates parameter gradients and returns `dL/dX`.
    pub fn backward(&mut self, d_logits: &[f64]) -> Result<Matrix> {
        let b = self.forward_rows.ok_or(Error::NoForward("selectornet"))?;
        if d_logits.len() != b {
            return Err(Error::Shape {
                op: "selectornet_backward",
                left: (b, 1),
                right: (d_logits.len(), 1),
            });
        }
        let f = self.config.feature_dim;
        let dz = Matrix::from_vec(b, 1, d_logits.to_vec())?;
        let (d_decision, _) = self.head.backward(&dz)?.split_cols(f);
        let mut d_next = Matrix::zeros(b, f);
        let mut dx = Matrix::zeros(b, f);
        for step in self.steps.iter_mut().rev() {
            let (dxs, d_step) = step.backward(&d_decision, &d_next)?;
            dx.add_assign(&dxs)?;
            d_next = d_step;
        }
        Ok(dx)
    }
}

impl Module for SelectorNet {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>)) {
        for (i, s) in self.steps.iter().enumerate() {
            s.visit(&join(prefix, &format!("steps.{i}")), f);
        }
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>)) {
        for (i, s) in self.steps.iter_mut().enumerate() {
            s.visit_mut(&join(prefix, &format!("steps.{i}")), f);
        }
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}

impl Classifier for SelectorNet {
    fn set_training(&mut self, training: bool) {
        SelectorNet::set_training(self, training);
    }

    fn forward_logits(&mut self, x: &Matrix, embed: &Matrix) -> Result<Vec<f64>> {
        Ok(SelectorNet::forward_logits(self, x, embed)?.0)
    }

    fn backward_logits(&mut self, d_logits: &[f64]) -> Result<()> {
        self.backward(d_logits).map(|_| ())
    }
}
