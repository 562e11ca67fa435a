//! Single-layer LSTM over the input window with a dense head on the last
//! hidden state. Inverted dropout is applied to that hidden state while
//! training.

use ndarray::{Array2, ArrayView2, ArrayView3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    join, lstm_sequence_backward, lstm_sequence_forward, DenseParams, LstmCellParams,
    LstmSequenceCache, ParamMut, ParamRef, Parameters,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmConfig {
    pub features: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            features: 1,
            hidden: 25,
            dropout: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModelParams {
    pub config: LstmConfig,
    pub cell: LstmCellParams,
    pub head: DenseParams,
}

/// Hidden and cell state for a batch, each batch x hidden.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array2<f64>,
    pub c: Array2<f64>,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self {
            h: Array2::zeros((batch, hidden)),
            c: Array2::zeros((batch, hidden)),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.h.nrows()
    }

    /// The first `n` rows, or `None` if the state holds fewer.
    pub fn take_rows(&self, n: usize) -> Option<LstmState> {
        if n > self.batch_size() {
            return None;
        }
        Some(Self {
            h: self.h.slice(ndarray::s![..n, ..]).to_owned(),
            c: self.c.slice(ndarray::s![..n, ..]).to_owned(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct LstmModelCache {
    seq: LstmSequenceCache,
    /// Already scaled by 1/(1-rate); `None` when not training.
    mask: Option<Array2<f64>>,
    head_input: Array2<f64>,
}

impl LstmModelCache {
    /// State after the last step, for carrying into the next batch.
    pub fn final_state(&self) -> LstmState {
        LstmState {
            h: self.seq.h_last(),
            c: self.seq.c_last(),
        }
    }
}

impl LstmModelParams {
    pub fn new(config: LstmConfig) -> Result<Self> {
        if config.features == 0 || config.hidden == 0 || !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::InvalidConfig(format!(
                "invalid lstm config {config:?}"
            )));
        }
        Ok(Self {
            config,
            cell: LstmCellParams::new(config.features, config.hidden),
            head: DenseParams::new(config.hidden, 1),
        })
    }

    /// `inputs` is seq x batch x features. With `dropout_rng` set, a fresh
    /// dropout mask is drawn for `h_T`; otherwise dropout is the identity.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        inputs: ArrayView3<f64>,
        init: Option<&LstmState>,
        dropout_rng: Option<&mut R>,
    ) -> Result<(Array2<f64>, LstmModelCache)> {
        let (_, b, f) = inputs.dim();
        if f != self.config.features {
            return Err(Error::ShapeMismatch(format!(
                "lstm expects {} features, got {f}",
                self.config.features
            )));
        }
        let zeros;
        let state = match init {
            Some(s) => s,
            None => {
                zeros = LstmState::zeros(b, self.config.hidden);
                &zeros
            }
        };
        let seq = lstm_sequence_forward(inputs, state.h.view(), state.c.view(), &self.cell)?;
        let h_last = seq.h_last();
        let rate = self.config.dropout;
        let mask = match dropout_rng {
            Some(rng) if rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                Some(Array2::from_shape_fn(h_last.raw_dim(), |_| {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                }))
            }
            _ => None,
        };
        let head_input = match &mask {
            Some(m) => &h_last * m,
            None => h_last,
        };
        let preds = self.head.forward(head_input.view())?;
        Ok((
            preds,
            LstmModelCache {
                seq,
                mask,
                head_input,
            },
        ))
    }

    /// Evaluation-mode prediction from a zero initial state.
    pub fn predict(&self, inputs: ArrayView3<f64>) -> Result<Array2<f64>> {
        Ok(self
            .forward::<rand_chacha::ChaCha8Rng>(inputs, None, None)?
            .0)
    }

    /// `dpred` is batch x 1.
    pub fn backward(&mut self, cache: &LstmModelCache, dpred: ArrayView2<f64>) -> Result<()> {
        let mut dh = self.head.backward(dpred, cache.head_input.view())?;
        if let Some(m) = &cache.mask {
            dh *= m;
        }
        lstm_sequence_backward(&cache.seq, dh.view(), &mut self.cell)?;
        Ok(())
    }
}

impl Parameters for LstmModelParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(ParamRef<'_>)) {
        self.cell.visit(&join(prefix, "lstm"), f);
        self.head.visit(&join(prefix, "dense"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(ParamMut<'_>)) {
        self.cell.visit_mut(&join(prefix, "lstm"), f);
        self.head.visit_mut(&join(prefix, "dense"), f);
    }
}
