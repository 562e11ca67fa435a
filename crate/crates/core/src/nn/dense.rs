use ndarray::{Array2, ArrayView2, Axis};

use super::{join, Param1, Param2, ParamKind, ParamMut, ParamRef, Parameters};
use crate::error::{Error, Result};

/// Affine map `y = x W + b` over a batch of row vectors, no activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// in x out
    pub weights: Param2,
    pub bias: Param1,
}

impl DenseParams {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        Self {
            weights: Param2::zeros((n_in, n_out)),
            bias: Param1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.value.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.weights.value.ncols()
    }

    fn check(&self, input: &ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.n_in() {
            return Err(Error::ShapeMismatch(format!(
                "dense expects {} inputs, got {}",
                self.n_in(),
                input.ncols()
            )));
        }
        Ok(())
    }

    /// batch x in -> batch x out
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(&input)?;
        Ok(input.dot(&self.weights.value) + &self.bias.value)
    }

    /// Accumulates weight and bias gradients; returns the input gradient.
    pub fn backward(
        &mut self,
        grad_out: ArrayView2<f64>,
        input: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        self.check(&input)?;
        if grad_out.dim() != (input.nrows(), self.n_out()) {
            return Err(Error::ShapeMismatch(format!(
                "dense upstream gradient {:?}, expected {:?}",
                grad_out.dim(),
                (input.nrows(), self.n_out())
            )));
        }
        self.weights.grad += &input.t().dot(&grad_out);
        self.bias.grad += &grad_out.sum_axis(Axis(0));
        Ok(grad_out.dot(&self.weights.value.t()))
    }
}

impl Parameters for DenseParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        let (i, o) = self.weights.value.dim();
        f(self.weights.view(
            join(prefix, "weights"),
            ParamKind::Weight {
                fan_in: i,
                fan_out: o,
            },
        ));
        f(self.bias.view(join(prefix, "bias"), ParamKind::Bias));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>)) {
        let (i, o) = self.weights.value.dim();
        f(self.weights.view_mut(
            join(prefix, "weights"),
            ParamKind::Weight {
                fan_in: i,
                fan_out: o,
            },
        ));
        f(self.bias.view_mut(join(prefix, "bias"), ParamKind::Bias));
    }
}

pub fn dense_forward(input: ArrayView2<f64>, params: &DenseParams) -> Result<Array2<f64>> {
    params.forward(input)
}
