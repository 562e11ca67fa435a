//! Dense-array layer primitives with hand-written backward passes.
//!
//! Every learnable array is a [`Param`]: a value and a same-shape gradient
//! buffer. Backward passes add into the gradient buffers; callers zero them
//! before each minibatch. Models expose their parameters through
//! [`Parameters`], which is what the optimizers, initializers, gradient
//! checker and checkpoint code operate on.

mod activation;
mod conv;
mod dense;
mod grad_check;
mod lstm;
mod serialize;

use ndarray::{Array, Dimension, ShapeBuilder};

pub use activation::{
    relu, relu_derivative, sigmoid, sigmoid_derivative, tanh, tanh_derivative, Activation,
};
pub use conv::{conv1d_backward, conv1d_forward, ConvLayerParams};
pub use dense::{dense_forward, DenseParams};
pub use grad_check::{grad_check, relative_error, GradCheckReport, GroupError};
pub use lstm::{
    lstm_cell_forward, lstm_sequence_backward, lstm_sequence_forward, LstmCellParams,
    LstmSequenceCache, LstmStepCache,
};
pub use serialize::{read_params, write_params};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight { fan_in: usize, fan_out: usize },
    Bias,
}

impl ParamKind {
    pub fn is_weight(self) -> bool {
        matches!(self, ParamKind::Weight { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<D: Dimension> {
    pub value: Array<f64, D>,
    pub grad: Array<f64, D>,
}

impl<D: Dimension> Param<D> {
    pub fn zeros<Sh: ShapeBuilder<Dim = D> + Clone>(shape: Sh) -> Self {
        Self {
            value: Array::zeros(shape.clone()),
            grad: Array::zeros(shape),
        }
    }

    pub fn from_value(value: Array<f64, D>) -> Self {
        let grad = Array::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    fn view(&self, name: String, kind: ParamKind) -> ParamRef<'_> {
        ParamRef {
            name,
            kind,
            value: self.value.as_slice().expect("params are contiguous"),
            grad: self.grad.as_slice().expect("params are contiguous"),
        }
    }

    fn view_mut(&mut self, name: String, kind: ParamKind) -> ParamMut<'_> {
        ParamMut {
            name,
            kind,
            value: self.value.as_slice_mut().expect("params are contiguous"),
            grad: self.grad.as_slice_mut().expect("params are contiguous"),
        }
    }
}

pub type Param1 = Param<ndarray::Ix1>;
pub type Param2 = Param<ndarray::Ix2>;
pub type Param3 = Param<ndarray::Ix3>;

pub struct ParamRef<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub value: &'a [f64],
    pub grad: &'a [f64],
}

pub struct ParamMut<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub value: &'a mut [f64],
    pub grad: &'a mut [f64],
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Anything owning learnable arrays. Visit order is fixed, so flat views of
/// values and gradients line up across calls and across clones.
pub trait Parameters {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>));

    fn zero_grads(&mut self) {
        self.visit_mut("", &mut |p| p.grad.fill(0.0));
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |p| n += p.value.len());
        n
    }

    fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit("", &mut |p| out.extend_from_slice(p.value));
        out
    }

    fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit("", &mut |p| out.extend_from_slice(p.grad));
        out
    }

    /// Overwrite every parameter from a flat vector in visit order.
    fn set_flat_values(&mut self, values: &[f64]) {
        let mut offset = 0;
        self.visit_mut("", &mut |p| {
            let n = p.value.len();
            p.value.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        });
        assert_eq!(offset, values.len(), "flat parameter length mismatch");
    }

    /// `(name, len)` of every parameter array in visit order.
    fn param_layout(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit("", &mut |p| out.push((p.name, p.value.len())));
        out
    }
}
