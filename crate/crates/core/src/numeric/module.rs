//! Parameter storage and named traversal.
//!
//! Every trainable block implements [`Module`], which walks its tensors in a
//! fixed order under dotted names (`steps.0.fab.q.weight`). Optimizer steps,
//! gradient checks and checkpoints are all written against that traversal.

use super::Matrix;
use crate::error::{Error, Result};

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Param {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

pub enum Tensor<'a> {
    Param(&'a Param),
    /// Non-trainable state, e.g. batch-norm running statistics.
    Buffer(&'a Matrix),
}

pub enum TensorMut<'a> {
    Param(&'a mut Param),
    Buffer(&'a mut Matrix),
}

pub trait Module {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Tensor<'_>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, TensorMut<'_>));
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_owned()
    } else {
        format!("{prefix}.{name}")
    }
}

pub fn zero_grad<M: Module + ?Sized>(m: &mut M) {
    m.visit_mut("", &mut |_, t| {
        if let TensorMut::Param(p) = t {
            p.zero_grad();
        }
    });
}

pub fn param_count<M: Module + ?Sized>(m: &M) -> usize {
    let mut n = 0;
    m.visit("", &mut |_, t| {
        if let Tensor::Param(p) = t {
            n += p.value.data().len();
        }
    });
    n
}

pub fn flat_params<M: Module + ?Sized>(m: &M) -> Vec<f64> {
    let mut out = Vec::new();
    m.visit("", &mut |_, t| {
        if let Tensor::Param(p) = t {
            out.extend_from_slice(p.value.data());
        }
    });
    out
}

pub fn flat_grads<M: Module + ?Sized>(m: &M) -> Vec<f64> {
    let mut out = Vec::new();
    m.visit("", &mut |_, t| {
        if let Tensor::Param(p) = t {
            out.extend_from_slice(p.grad.data());
        }
    });
    out
}

/// Writes `values` back in traversal order. Length must equal [`param_count`].
pub fn set_flat_params<M: Module + ?Sized>(m: &mut M, values: &[f64]) -> Result<()> {
    let expected = param_count(m);
    if values.len() != expected {
        return Err(Error::Shape {
            op: "set_flat_params",
            left: (expected, 1),
            right: (values.len(), 1),
        });
    }
    let mut offset = 0;
    m.visit_mut("", &mut |_, t| {
        if let TensorMut::Param(p) = t {
            let n = p.value.data().len();
            p.value
                .data_mut()
                .copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
    });
    Ok(())
}

/// Named parameter and buffer names in traversal order.
pub fn tensor_names<M: Module + ?Sized>(m: &M) -> Vec<String> {
    let mut out = Vec::new();
    m.visit("", &mut |name, _| out.push(name.to_owned()));
    out
}

pub fn all_finite<M: Module + ?Sized>(m: &M) -> bool {
    let mut ok = true;
    m.visit("", &mut |_, t| match t {
        Tensor::Param(p) => ok &= p.value.is_finite() && p.grad.is_finite(),
        Tensor::Buffer(b) => ok &= b.is_finite(),
    });
    ok
}
