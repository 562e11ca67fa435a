//! Training configuration and its flat `key = value` text form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::batch::SamplingMode;
use super::loss::{check_task_weights, LossKind};
use crate::error::{Error, Result};
use crate::lorenz::{Layout, Scenario, Series, WindowSpec};
use crate::models::{ModelKind, WaveNetConfig, FFN_WINDOW};
use crate::optim::InitScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::InvalidConfig(format!("unknown optimizer '{other}'"))),
        }
    }
}

pub const DEFAULT_SEEDS: [u64; 3] = [1234, 1235, 42];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub conditional: bool,
    pub multitask: bool,
    /// Per-task loss weights in x, y, z order; only used when multitask.
    pub task_weights: [f64; 3],
    /// Target series for single-task runs.
    pub series: Series,
    pub scenario: Scenario,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub init: InitScheme,
    /// L2 penalty on weight arrays.
    pub l2: f64,
    pub sampling: SamplingMode,
    /// LSTM only.
    pub dropout: f64,
    /// LSTM only.
    pub hidden: usize,
    /// WaveNet only: filters carried through the dilated stack.
    pub stack_channels: usize,
    /// WaveNet only.
    pub layers: usize,
    /// WaveNet only.
    pub kernel_size: usize,
}

const KEYS: [&str; 20] = [
    "model",
    "conditional",
    "multitask",
    "task_weights",
    "series",
    "scenario",
    "seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "optimizer",
    "loss",
    "init",
    "l2",
    "sampling",
    "dropout",
    "hidden",
    "stack_channels",
    "layers",
    "kernel_size",
];

impl TrainConfig {
    /// Defaults for `model`: WaveNet trains 100 epochs with He init and L2
    /// 1e-3; the LSTM 30 epochs with Xavier init and dropout 0.1; the
    /// feed-forward baseline uses plain SGD on squared error.
    pub fn new(model: ModelKind) -> Self {
        let third = 1.0 / 3.0;
        let base = Self {
            model,
            conditional: false,
            multitask: false,
            task_weights: [third, third, third],
            series: Series::X,
            scenario: Scenario::A,
            seed: 1234,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            loss: LossKind::Mae,
            init: InitScheme::HeNormal,
            l2: 1e-3,
            sampling: SamplingMode::Shuffled,
            dropout: 0.0,
            hidden: 25,
            stack_channels: 1,
            layers: 4,
            kernel_size: 2,
        };
        match model {
            ModelKind::WaveNet => base,
            ModelKind::Lstm => Self {
                epochs: 30,
                init: InitScheme::XavierUniform,
                l2: 0.0,
                dropout: 0.1,
                ..base
            },
            ModelKind::Ffn => Self {
                epochs: 150,
                learning_rate: 0.05,
                optimizer: OptimizerKind::Sgd,
                loss: LossKind::Mse,
                init: InitScheme::XavierUniform,
                l2: 0.0,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be non-negative, got {}", self.l2));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.multitask {
            if self.model != ModelKind::WaveNet {
                return bad("multitask is only available for wavenet".into());
            }
            check_task_weights(&self.task_weights)?;
        }
        if self.model == ModelKind::Ffn && self.conditional {
            return bad("the feed-forward baseline is unconditional only".into());
        }
        if self.sampling == SamplingMode::Adjacent && self.model != ModelKind::Lstm {
            return bad("adjacent sampling only applies to the lstm".into());
        }
        if self.hidden == 0 || self.stack_channels == 0 || self.layers == 0 || self.kernel_size == 0
        {
            return bad("hidden, stack_channels, layers and kernel_size must be >= 1".into());
        }
        if self.layers > 16 {
            return bad(format!(
                "layers = {} is too deep for a 1500-step series",
                self.layers
            ));
        }
        Ok(())
    }

    pub fn wavenet_config(&self) -> WaveNetConfig {
        WaveNetConfig {
            n_layers: self.layers,
            kernel_size: self.kernel_size,
            channels: self.stack_channels,
            in_channels: self.n_inputs(),
            n_tasks: if self.multitask { 3 } else { 1 },
        }
    }

    pub fn n_inputs(&self) -> usize {
        if self.conditional {
            3
        } else {
            1
        }
    }

    /// Input window length. The LSTM sequence matches the default
    /// convolutional receptive field.
    pub fn window(&self) -> usize {
        match self.model {
            ModelKind::WaveNet => self.wavenet_config().receptive_field(),
            ModelKind::Lstm => WaveNetConfig::default().receptive_field(),
            ModelKind::Ffn => FFN_WINDOW,
        }
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec {
            window: self.window(),
            conditional: self.conditional,
            multitask: self.multitask,
            target: self.series,
            layout: if self.model == ModelKind::Lstm {
                Layout::Recurrent
            } else {
                Layout::Conv
            },
        }
    }

    /// Loss weights per output column.
    pub fn loss_weights(&self) -> Vec<f64> {
        if self.multitask {
            self.task_weights.to_vec()
        } else {
            vec![1.0]
        }
    }

    /// Model label used in reports; adjacent-sampling LSTM runs are tagged.
    pub fn label(&self) -> String {
        match (self.model, self.sampling) {
            (ModelKind::Lstm, SamplingMode::Adjacent) => "lstm_adjacent".into(),
            (m, _) => m.name().into(),
        }
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let w = &self.task_weights;
        let vals = [
            self.model.name().to_string(),
            self.conditional.to_string(),
            self.multitask.to_string(),
            format!("{},{},{}", w[0], w[1], w[2]),
            self.series.name().to_string(),
            self.scenario.name().to_string(),
            self.seed.to_string(),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.learning_rate.to_string(),
            self.optimizer.name().to_string(),
            self.loss.name().to_string(),
            self.init.name().to_string(),
            self.l2.to_string(),
            self.sampling.name().to_string(),
            self.dropout.to_string(),
            self.hidden.to_string(),
            self.stack_channels.to_string(),
            self.layers.to_string(),
            self.kernel_size.to_string(),
        ];
        KEYS.iter().copied().zip(vals).collect()
    }

    /// One `key = value` line per field.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Set a single field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{v}'")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::InvalidConfig(format!(
                    "{key}: expected true/false, got '{v}'"
                ))),
            }
        }
        match key {
            "model" => self.model = value.parse()?,
            "conditional" => self.conditional = flag(key, value)?,
            "multitask" => self.multitask = flag(key, value)?,
            "task_weights" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| num(key, p.trim()))
                    .collect::<Result<_>>()?;
                self.task_weights = parts.try_into().map_err(|v: Vec<f64>| {
                    Error::WeightMismatch(format!("expected 3 task weights, got {}", v.len()))
                })?;
            }
            "series" => self.series = value.parse()?,
            "scenario" => self.scenario = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "loss" => self.loss = value.parse()?,
            "init" => self.init = value.parse()?,
            "l2" => self.l2 = num(key, value)?,
            "sampling" => self.sampling = value.parse()?,
            "dropout" => self.dropout = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "stack_channels" => self.stack_channels = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "kernel_size" => self.kernel_size = num(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Build from `key = value` pairs. The model kind picks the defaults
    /// for every key not given; unknown and repeated keys are rejected.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k) {
                return Err(Error::InvalidConfig(format!("unknown key '{k}'")));
            }
            if map.insert(k, v).is_some() {
                return Err(Error::InvalidConfig(format!("key '{k}' given twice")));
            }
        }
        let model = match map.get("model") {
            Some(m) => m.parse()?,
            None => ModelKind::WaveNet,
        };
        let mut cfg = Self::new(model);
        for (k, v) in map {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Parse the flat text form. Blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        Self::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }
}

/// Split `key = value` lines, skipping blanks and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "line {}: expected 'key = value', got '{line}'",
                n + 1
            ))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
