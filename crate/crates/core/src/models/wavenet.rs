//! Dilated causal convolution stack with residual and skip connections.
//!
//! ```text
//! x -> 1x1 conv -> s0
//! for l in 1..=L:  a_l = relu(dilated_conv_l(s_{l-1}))      (dilation 2^(l-1))
//!                  s_l = tail(s_{l-1}) + a_l                 (residual)
//!                  k_l = skip_conv_l(tail(a_l))              (skip tap)
//! z = s_L + sum_l k_l
//! y_j = head_j(z)[last]                                      (one head per task)
//! ```
//!
//! Convolutions are unpadded, so every layer shrinks the width by
//! `d*(k-1)`; residual adds and skip taps keep the time-aligned tail. With
//! the default config and a 16-wide input the width goes 16, 15, 13, 9, 1.

use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::nn::{relu, ConvLayerParams, ParamMut, ParamRef, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveNetConfig {
    pub n_layers: usize,
    pub kernel_size: usize,
    /// Filters per layer, i.e. channels carried through the stack.
    pub channels: usize,
    pub in_channels: usize,
    pub n_tasks: usize,
}

impl Default for WaveNetConfig {
    fn default() -> Self {
        Self {
            n_layers: 4,
            kernel_size: 2,
            channels: 1,
            in_channels: 1,
            n_tasks: 1,
        }
    }
}

impl WaveNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0
            || self.kernel_size == 0
            || self.channels == 0
            || self.in_channels == 0
            || self.n_tasks == 0
        {
            return Err(Error::InvalidConfig(format!(
                "wavenet dimensions must be >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn dilation(&self, layer: usize) -> usize {
        1 << layer
    }

    /// Past steps seen by the last output position:
    /// `1 + (k-1)(2^L - 1)`, which is `k * 2^(L-1)` for `k = 2`.
    pub fn receptive_field(&self) -> usize {
        1 + (self.kernel_size - 1) * ((1 << self.n_layers) - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveNetParams {
    pub config: WaveNetConfig,
    pub input: ConvLayerParams,
    pub dilated: Vec<ConvLayerParams>,
    pub skips: Vec<ConvLayerParams>,
    pub heads: Vec<ConvLayerParams>,
}

/// Per-example forward values needed by the backward pass.
#[derive(Debug, Clone)]
pub struct WaveNetCache {
    input: Array2<f64>,
    /// `streams[l]` is s_l; `streams[0]` is the input conv output.
    streams: Vec<Array2<f64>>,
    /// Relu outputs a_l.
    acts: Vec<Array2<f64>>,
    /// z, the head input.
    merged: Array2<f64>,
}

fn tail(a: &Array2<f64>, width: usize) -> ArrayView2<'_, f64> {
    let w = a.ncols();
    a.slice(s![.., w - width..])
}

impl WaveNetParams {
    /// All-zero parameters with the shapes implied by `config`.
    pub fn new(config: WaveNetConfig) -> Result<Self> {
        config.validate()?;
        let m = config.channels;
        Ok(Self {
            config,
            input: ConvLayerParams::new(config.in_channels, m, 1, 1),
            dilated: (0..config.n_layers)
                .map(|l| ConvLayerParams::new(m, m, config.kernel_size, config.dilation(l)))
                .collect(),
            skips: (0..config.n_layers)
                .map(|_| ConvLayerParams::new(m, m, 1, 1))
                .collect(),
            heads: (0..config.n_tasks)
                .map(|_| ConvLayerParams::new(m, 1, 1, 1))
                .collect(),
        })
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        let (c, w) = x.dim();
        if c != self.config.in_channels || w < self.config.receptive_field() {
            return Err(Error::ShapeMismatch(format!(
                "wavenet expects {} channels x >= {} positions, got {c} x {w}",
                self.config.in_channels,
                self.config.receptive_field()
            )));
        }
        Ok(())
    }

    /// One example (channels x width) to one prediction per task.
    pub fn forward_one(&self, x: ArrayView2<f64>) -> Result<(Vec<f64>, WaveNetCache)> {
        self.check_input(&x)?;
        let s0 = self.input.forward(x)?;
        let mut streams = vec![s0];
        let mut acts = Vec::with_capacity(self.dilated.len());
        for conv in &self.dilated {
            let prev = streams.last().expect("non-empty");
            let a = conv.forward(prev.view())?.mapv_into(relu);
            let next = &tail(prev, a.ncols()) + &a;
            acts.push(a);
            streams.push(next);
        }
        let last = streams.last().expect("non-empty");
        let width = last.ncols();
        let mut merged = last.clone();
        for (skip, a) in self.skips.iter().zip(&acts) {
            merged += &skip.forward(tail(a, width))?;
        }
        let readout = merged.slice(s![.., width - 1..]);
        let preds = self
            .heads
            .iter()
            .map(|h| h.forward(readout).map(|o| o[[0, 0]]))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            preds,
            WaveNetCache {
                input: x.to_owned(),
                streams,
                acts,
                merged,
            },
        ))
    }

    /// Accumulate parameter gradients for one example given d(loss)/d(pred)
    /// per task. Returns the gradient w.r.t. the input window.
    pub fn backward_one(&mut self, cache: &WaveNetCache, dpred: &[f64]) -> Result<Array2<f64>> {
        if dpred.len() != self.heads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} task gradients for {} heads",
                dpred.len(),
                self.heads.len()
            )));
        }
        let m = self.config.channels;
        let width = cache.merged.ncols();
        let readout = cache.merged.slice(s![.., width - 1..]);
        let mut dread = Array2::zeros((m, 1));
        for (head, &g) in self.heads.iter_mut().zip(dpred) {
            dread += &head.backward(Array2::from_elem((1, 1), g).view(), readout)?;
        }
        let mut dmerged = Array2::zeros((m, width));
        dmerged.slice_mut(s![.., width - 1..]).assign(&dread);

        // d s_l flowing backward; starts as dz for s_L
        let mut dstream = dmerged.clone();
        for l in (0..self.dilated.len()).rev() {
            let a = &cache.acts[l];
            let prev = &cache.streams[l];
            let aw = a.ncols();
            // skip tap
            let mut da = Array2::zeros(a.raw_dim());
            let dskip = self.skips[l].backward(dmerged.view(), tail(a, width))?;
            da.slice_mut(s![.., aw - width..]).assign(&dskip);
            // residual branch
            da += &dstream;
            let dpre = ndarray::Zip::from(&da)
                .and(a)
                .map_collect(|&g, &y| if y > 0.0 { g } else { 0.0 });
            let mut dprev = self.dilated[l].backward(dpre.view(), prev.view())?;
            let pw = prev.ncols();
            dprev.slice_mut(s![.., pw - aw..]).scaled_add(1.0, &dstream);
            dstream = dprev;
        }
        self.input.backward(dstream.view(), cache.input.view())
    }

    /// batch x channels x width -> batch x n_tasks
    pub fn predict(&self, inputs: ArrayView3<f64>) -> Result<Array2<f64>> {
        let b = inputs.dim().0;
        let mut out = Array2::zeros((b, self.config.n_tasks));
        for (i, x) in inputs.axis_iter(Axis(0)).enumerate() {
            let (p, _) = self.forward_one(x)?;
            out.row_mut(i).assign(&ndarray::Array1::from(p));
        }
        Ok(out)
    }

    pub fn forward_batch(
        &self,
        inputs: ArrayView3<f64>,
    ) -> Result<(Array2<f64>, Vec<WaveNetCache>)> {
        let b = inputs.dim().0;
        let mut out = Array2::zeros((b, self.config.n_tasks));
        let mut caches = Vec::with_capacity(b);
        for (i, x) in inputs.axis_iter(Axis(0)).enumerate() {
            let (p, c) = self.forward_one(x)?;
            out.row_mut(i).assign(&ndarray::Array1::from(p));
            caches.push(c);
        }
        Ok((out, caches))
    }

    /// Backward over a batch; returns batch x channels x width input gradients.
    pub fn backward_batch(
        &mut self,
        caches: &[WaveNetCache],
        dpred: ArrayView2<f64>,
    ) -> Result<Array3<f64>> {
        if dpred.nrows() != caches.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradients for {} examples",
                dpred.nrows(),
                caches.len()
            )));
        }
        let Some(first) = caches.first() else {
            return Ok(Array3::zeros((
                0,
                self.config.in_channels,
                self.config.receptive_field(),
            )));
        };
        let (c, w) = first.input.dim();
        let mut dx = Array3::zeros((caches.len(), c, w));
        for (i, cache) in caches.iter().enumerate() {
            let g = dpred.row(i).to_vec();
            dx.index_axis_mut(Axis(0), i)
                .assign(&self.backward_one(cache, &g)?);
        }
        Ok(dx)
    }
}

impl Parameters for WaveNetParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.input.visit(&crate::nn::join(prefix, "input"), f);
        for (l, c) in self.dilated.iter().enumerate() {
            c.visit(&crate::nn::join(prefix, &format!("dilated{l}")), f);
        }
        for (l, c) in self.skips.iter().enumerate() {
            c.visit(&crate::nn::join(prefix, &format!("skip{l}")), f);
        }
        for (j, c) in self.heads.iter().enumerate() {
            c.visit(&crate::nn::join(prefix, &format!("head{j}")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>)) {
        self.input.visit_mut(&crate::nn::join(prefix, "input"), f);
        for (l, c) in self.dilated.iter_mut().enumerate() {
            c.visit_mut(&crate::nn::join(prefix, &format!("dilated{l}")), f);
        }
        for (l, c) in self.skips.iter_mut().enumerate() {
            c.visit_mut(&crate::nn::join(prefix, &format!("skip{l}")), f);
        }
        for (j, c) in self.heads.iter_mut().enumerate() {
            c.visit_mut(&crate::nn::join(prefix, &format!("head{j}")), f);
        }
    }
}
