use ndarray::{Array2, ArrayView2};

use super::{join, Param1, Param3, ParamKind, ParamMut, ParamRef, Parameters};
use crate::error::{Error, Result};

/// 1-D convolution layer computing a dilated cross-correlation with no
/// padding:
///
/// `out[o, i] = bias[o] + sum_c sum_j input[c, i + d*j] * kernel[o, c, j]`
///
/// so `out_width = width - d*(k - 1)`. Output position `i` is aligned with
/// input position `i + d*(k - 1)`, the latest sample it reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    /// out_channels x in_channels x kernel_size
    pub kernel: Param3,
    pub bias: Param1,
    pub dilation: usize,
}

impl ConvLayerParams {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        dilation: usize,
    ) -> Self {
        assert!(
            kernel_size >= 1 && dilation >= 1,
            "kernel_size and dilation must be >= 1"
        );
        Self {
            kernel: Param3::zeros((out_channels, in_channels, kernel_size)),
            bias: Param1::zeros(out_channels),
            dilation,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.value.dim().0
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.value.dim().1
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.value.dim().2
    }

    /// Number of input positions consumed beyond the first: `d*(k-1)`.
    pub fn span(&self) -> usize {
        self.dilation * (self.kernel_size() - 1)
    }

    pub fn out_width(&self, width: usize) -> Option<usize> {
        width.checked_sub(self.span()).filter(|&w| w >= 1)
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<usize> {
        let (c, w) = input.dim();
        if c != self.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        self.out_width(w).ok_or_else(|| {
            Error::ShapeMismatch(format!(
                "conv input width {w} shorter than receptive span {}",
                self.span() + 1
            ))
        })
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out_w = self.check_input(&input)?;
        let (o_n, c_n, k_n) = self.kernel.value.dim();
        let d = self.dilation;
        let kernel = &self.kernel.value;
        let mut out = Array2::zeros((o_n, out_w));
        for o in 0..o_n {
            let b = self.bias.value[o];
            for i in 0..out_w {
                let mut s = b;
                for c in 0..c_n {
                    for j in 0..k_n {
                        s += input[[c, i + d * j]] * kernel[[o, c, j]];
                    }
                }
                out[[o, i]] = s;
            }
        }
        Ok(out)
    }

    /// Accumulates kernel and bias gradients; returns the input gradient.
    pub fn backward(
        &mut self,
        grad_out: ArrayView2<f64>,
        input: ArrayView2<f64>,
    ) -> Result<Array2<f64>> {
        let out_w = self.check_input(&input)?;
        let (o_n, c_n, k_n) = self.kernel.value.dim();
        if grad_out.dim() != (o_n, out_w) {
            return Err(Error::ShapeMismatch(format!(
                "conv upstream gradient {:?}, expected {:?}",
                grad_out.dim(),
                (o_n, out_w)
            )));
        }
        let d = self.dilation;
        let mut grad_in = Array2::zeros(input.raw_dim());
        for o in 0..o_n {
            for i in 0..out_w {
                let g = grad_out[[o, i]];
                if g == 0.0 {
                    continue;
                }
                self.bias.grad[o] += g;
                for c in 0..c_n {
                    for j in 0..k_n {
                        let p = i + d * j;
                        self.kernel.grad[[o, c, j]] += g * input[[c, p]];
                        grad_in[[c, p]] += g * self.kernel.value[[o, c, j]];
                    }
                }
            }
        }
        Ok(grad_in)
    }
}

impl Parameters for ConvLayerParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        let (o, c, k) = self.kernel.value.dim();
        f(self.kernel.view(
            join(prefix, "kernel"),
            ParamKind::Weight {
                fan_in: c * k,
                fan_out: o * k,
            },
        ));
        f(self.bias.view(join(prefix, "bias"), ParamKind::Bias));
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>)) {
        let (o, c, k) = self.kernel.value.dim();
        f(self.kernel.view_mut(
            join(prefix, "kernel"),
            ParamKind::Weight {
                fan_in: c * k,
                fan_out: o * k,
            },
        ));
        f(self.bias.view_mut(join(prefix, "bias"), ParamKind::Bias));
    }
}

pub fn conv1d_forward(input: ArrayView2<f64>, params: &ConvLayerParams) -> Result<Array2<f64>> {
    params.forward(input)
}

pub fn conv1d_backward(
    grad_out: ArrayView2<f64>,
    input: ArrayView2<f64>,
    params: &mut ConvLayerParams,
) -> Result<Array2<f64>> {
    params.backward(grad_out, input)
}
