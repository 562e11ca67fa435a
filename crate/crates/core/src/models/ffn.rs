//! Feed-forward baseline: five lagged values, three sigmoid hidden units,
//! one linear output.

use ndarray::{Array2, ArrayView2, ArrayView3};

use crate::error::{Error, Result};
use crate::nn::{join, sigmoid, DenseParams, ParamMut, ParamRef, Parameters};

pub const FFN_WINDOW: usize = 5;
pub const FFN_HIDDEN: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct FfnParams {
    pub hidden: DenseParams,
    pub output: DenseParams,
}

#[derive(Debug, Clone)]
pub struct FfnCache {
    input: Array2<f64>,
    act: Array2<f64>,
}

impl Default for FfnParams {
    fn default() -> Self {
        Self {
            hidden: DenseParams::new(FFN_WINDOW, FFN_HIDDEN),
            output: DenseParams::new(FFN_HIDDEN, 1),
        }
    }
}

impl FfnParams {
    /// Accepts batch x 1 x 5 (conv layout) inputs.
    fn flatten(inputs: ArrayView3<f64>) -> Result<Array2<f64>> {
        let (b, c, w) = inputs.dim();
        if c != 1 || w != FFN_WINDOW {
            return Err(Error::ShapeMismatch(format!(
                "ffn expects batch x 1 x {FFN_WINDOW}, got {b} x {c} x {w}"
            )));
        }
        Ok(inputs
            .to_shape((b, w))
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?
            .to_owned())
    }

    pub fn forward_flat(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, FfnCache)> {
        let act = self.hidden.forward(x)?.mapv_into(sigmoid);
        let y = self.output.forward(act.view())?;
        Ok((
            y,
            FfnCache {
                input: x.to_owned(),
                act,
            },
        ))
    }

    pub fn forward(&self, inputs: ArrayView3<f64>) -> Result<(Array2<f64>, FfnCache)> {
        let x = Self::flatten(inputs)?;
        self.forward_flat(x.view())
    }

    pub fn predict(&self, inputs: ArrayView3<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(inputs)?.0)
    }

    pub fn backward(&mut self, cache: &FfnCache, dpred: ArrayView2<f64>) -> Result<()> {
        let dact = self.output.backward(dpred, cache.act.view())?;
        let dpre = dact * &cache.act.mapv(|s| s * (1.0 - s));
        self.hidden.backward(dpre.view(), cache.input.view())?;
        Ok(())
    }
}

impl Parameters for FfnParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.hidden.visit(&join(prefix, "hidden"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>)) {
        self.hidden.visit_mut(&join(prefix, "hidden"), f);
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}
