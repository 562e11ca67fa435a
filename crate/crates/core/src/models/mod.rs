//! The three forecaster families and a tagged union over them used by the
//! training loop.

mod ffn;
mod lstm;
mod wavenet;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, ArrayView3};
use rand_chacha::ChaCha8Rng;

pub use ffn::{FfnCache, FfnParams, FFN_HIDDEN, FFN_WINDOW};
pub use lstm::{LstmConfig, LstmModelCache, LstmModelParams, LstmState};
pub use wavenet::{WaveNetCache, WaveNetConfig, WaveNetParams};

use crate::error::{Error, Result};
use crate::lorenz::Layout;
use crate::nn::{ParamMut, ParamRef, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    WaveNet,
    Lstm,
    Ffn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::WaveNet => "wavenet",
            ModelKind::Lstm => "lstm",
            ModelKind::Ffn => "ffn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wavenet" => Ok(ModelKind::WaveNet),
            "lstm" => Ok(ModelKind::Lstm),
            "ffn" => Ok(ModelKind::Ffn),
            other => Err(Error::InvalidConfig(format!(
                "unknown model '{other}' (wavenet, lstm, ffn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    WaveNet(WaveNetParams),
    Lstm(LstmModelParams),
    Ffn(FfnParams),
}

#[derive(Debug, Clone)]
pub enum ForwardCache {
    WaveNet(Vec<WaveNetCache>),
    Lstm(LstmModelCache),
    Ffn(FfnCache),
}

impl ForwardCache {
    /// LSTM state after the batch, if this is a recurrent cache.
    pub fn final_state(&self) -> Option<LstmState> {
        match self {
            ForwardCache::Lstm(c) => Some(c.final_state()),
            _ => None,
        }
    }
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::WaveNet(_) => ModelKind::WaveNet,
            Model::Lstm(_) => ModelKind::Lstm,
            Model::Ffn(_) => ModelKind::Ffn,
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            Model::Lstm(_) => Layout::Recurrent,
            _ => Layout::Conv,
        }
    }

    /// Input window length the model is built for.
    pub fn window(&self) -> usize {
        match self {
            Model::WaveNet(p) => p.config.receptive_field(),
            // sequence length matches the convolutional receptive field
            Model::Lstm(_) => WaveNetConfig::default().receptive_field(),
            Model::Ffn(_) => FFN_WINDOW,
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            Model::WaveNet(p) => p.config.in_channels,
            Model::Lstm(p) => p.config.features,
            Model::Ffn(_) => 1,
        }
    }

    pub fn n_tasks(&self) -> usize {
        match self {
            Model::WaveNet(p) => p.config.n_tasks,
            _ => 1,
        }
    }

    /// Inference with dropout off and zero recurrent state.
    pub fn predict(&self, inputs: ArrayView3<f64>) -> Result<Array2<f64>> {
        match self {
            Model::WaveNet(p) => p.predict(inputs),
            Model::Lstm(p) => p.predict(inputs),
            Model::Ffn(p) => p.predict(inputs),
        }
    }

    /// Training-mode forward. `carry` seeds the LSTM state; `rng` drives dropout.
    pub fn forward_train(
        &self,
        inputs: ArrayView3<f64>,
        carry: Option<&LstmState>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        match self {
            Model::WaveNet(p) => p
                .forward_batch(inputs)
                .map(|(y, c)| (y, ForwardCache::WaveNet(c))),
            Model::Lstm(p) => p
                .forward(inputs, carry, Some(rng))
                .map(|(y, c)| (y, ForwardCache::Lstm(c))),
            Model::Ffn(p) => p.forward(inputs).map(|(y, c)| (y, ForwardCache::Ffn(c))),
        }
    }

    /// Eval-mode forward that also returns the cache (used for state carry).
    pub fn forward_eval(
        &self,
        inputs: ArrayView3<f64>,
        carry: Option<&LstmState>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        match self {
            Model::Lstm(p) => p
                .forward::<ChaCha8Rng>(inputs, carry, None)
                .map(|(y, c)| (y, ForwardCache::Lstm(c))),
            Model::WaveNet(p) => p
                .forward_batch(inputs)
                .map(|(y, c)| (y, ForwardCache::WaveNet(c))),
            Model::Ffn(p) => p.forward(inputs).map(|(y, c)| (y, ForwardCache::Ffn(c))),
        }
    }

    pub fn backward(&mut self, cache: &ForwardCache, dpred: ArrayView2<f64>) -> Result<()> {
        match (self, cache) {
            (Model::WaveNet(p), ForwardCache::WaveNet(c)) => p.backward_batch(c, dpred).map(|_| ()),
            (Model::Lstm(p), ForwardCache::Lstm(c)) => p.backward(c, dpred),
            (Model::Ffn(p), ForwardCache::Ffn(c)) => p.backward(c, dpred),
            _ => Err(Error::ShapeMismatch(
                "forward cache does not belong to this model".into(),
            )),
        }
    }
}

impl Parameters for Model {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        match self {
            Model::WaveNet(p) => p.visit(prefix, f),
            Model::Lstm(p) => p.visit(prefix, f),
            Model::Ffn(p) => p.visit(prefix, f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>)) {
        match self {
            Model::WaveNet(p) => p.visit_mut(prefix, f),
            Model::Lstm(p) => p.visit_mut(prefix, f),
            Model::Ffn(p) => p.visit_mut(prefix, f),
        }
    }
}

/// Total number of learnable scalars.
pub fn param_count<P: Parameters + ?Sized>(params: &P) -> usize {
    params.param_count()
}
