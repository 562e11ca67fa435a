use std::fmt::Write as _;
use std::time::Instant;

use super::batch::BatchSampler;
use super::config::{OptimizerKind, TrainConfig};
use super::loss::weighted_task_loss;
use crate::error::{Error, Result};
use crate::lorenz::{
    generate_scaled, train_test_windows, SeriesSet, WindowedDataset, N_TEST, N_TRAIN,
};
use crate::models::{
    FfnParams, LstmConfig, LstmModelParams, LstmState, Model, ModelKind, WaveNetParams,
};
use crate::nn::Parameters;
use crate::optim::{
    add_l2_grad, init_params, l2_penalty, rng_for, AdamState, Optimizer, RNG_ALGORITHM,
};

/// RNG streams for batch shuffling and dropout. Initialization uses the
/// low streams, one per parameter array.
const SHUFFLE_STREAM: u64 = 1 << 32;
const DROPOUT_STREAM: u64 = (1 << 32) + 1;

/// Scaled series plus the train and test windows for one config.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub scaled: SeriesSet,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

pub fn prepare_data(config: &TrainConfig) -> Result<ExperimentData> {
    let scaled = generate_scaled(config.scenario)?;
    let (train, test) = train_test_windows(&scaled, &config.window_spec(), N_TRAIN, N_TEST)?;
    Ok(ExperimentData {
        scaled,
        train,
        test,
    })
}

/// Freshly initialized model for `config`.
pub fn build_model(config: &TrainConfig) -> Result<Model> {
    config.validate()?;
    let mut model = match config.model {
        ModelKind::WaveNet => Model::WaveNet(WaveNetParams::new(config.wavenet_config())?),
        ModelKind::Lstm => Model::Lstm(LstmModelParams::new(LstmConfig {
            features: config.n_inputs(),
            hidden: config.hidden,
            dropout: config.dropout,
        })?),
        ModelKind::Ffn => Model::Ffn(FfnParams::default()),
    };
    init_params(&mut model, config.init, config.seed);
    Ok(model)
}

/// Everything needed to replay a run, plus informational fields.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub config: TrainConfig,
    pub param_count: usize,
    pub window: usize,
    pub final_loss: Option<f64>,
    pub train_seconds: f64,
}

impl RunMetadata {
    /// The config block is a valid config file on its own; the remaining
    /// fields are written as comments so the file can be fed back as-is.
    pub fn to_text(&self) -> String {
        let mut out = self.config.to_text();
        let c = &self.config;
        let _ = writeln!(out, "# param_count = {}", self.param_count);
        let _ = writeln!(out, "# window = {}", self.window);
        let _ = writeln!(out, "# n_train = {N_TRAIN}");
        let _ = writeln!(out, "# n_test = {N_TEST}");
        let _ = writeln!(out, "# rng = {RNG_ALGORITHM}");
        if c.optimizer == OptimizerKind::Adam {
            let a = AdamState::new(0, c.learning_rate);
            let _ = writeln!(out, "# adam_beta1 = {}", a.beta1);
            let _ = writeln!(out, "# adam_beta2 = {}", a.beta2);
            let _ = writeln!(out, "# adam_eps = {}", a.eps);
        }
        if let Some(l) = self.final_loss {
            let _ = writeln!(out, "# final_train_loss = {l}");
        }
        let _ = writeln!(out, "# train_seconds = {:.3}", self.train_seconds);
        out
    }

    /// Recover the config from a metadata file.
    pub fn parse_config(text: &str) -> Result<TrainConfig> {
        TrainConfig::parse_text(text)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean training loss per epoch (data term only, without L2).
    pub history: Vec<f64>,
    pub metadata: RunMetadata,
    pub data: ExperimentData,
}

/// Generate data, initialize and train a model for `config`.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let start = Instant::now();
    let data = prepare_data(config)?;
    let mut model = build_model(config)?;
    let history = fit(&mut model, &data.train, config)?;
    let metadata = RunMetadata {
        config: config.clone(),
        param_count: model.param_count(),
        window: config.window(),
        final_loss: history.last().copied(),
        train_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        model,
        history,
        metadata,
        data,
    })
}

fn check_finite(model: &Model, epoch: usize, batch: usize, loss: f64) -> Result<()> {
    let mut ok = true;
    model.visit("", &mut |p| ok &= p.value.iter().all(|v| v.is_finite()));
    if ok {
        Ok(())
    } else {
        Err(Error::Diverged { epoch, batch, loss })
    }
}

/// Run the epoch loop on `train` in place and return the per-epoch loss.
pub fn fit(model: &mut Model, train: &WindowedDataset, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if train.n_tasks() != model.n_tasks()
        || train.channels != model.in_channels()
        || train.layout != model.layout()
    {
        return Err(Error::ShapeMismatch(format!(
            "dataset ({} channels, {} tasks, {:?}) does not fit the model ({} channels, {} tasks, {:?})",
            train.channels,
            train.n_tasks(),
            train.layout,
            model.in_channels(),
            model.n_tasks(),
            model.layout()
        )));
    }
    let mut sampler = BatchSampler::new(
        train.len(),
        config.batch_size,
        config.sampling,
        rng_for(config.seed, SHUFFLE_STREAM),
    )?;
    let mut dropout_rng = rng_for(config.seed, DROPOUT_STREAM);
    let mut opt = match config.optimizer {
        OptimizerKind::Adam => Optimizer::Adam(AdamState::for_params(model, config.learning_rate)),
        OptimizerKind::Sgd => Optimizer::Sgd {
            lr: config.learning_rate,
        },
    };
    let weights = config.loss_weights();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut carry: Option<LstmState> = None;
        let mut total = 0.0;
        for (b, idx) in sampler.next_epoch().iter().enumerate() {
            let (x, y) = train.batch(idx);
            model.zero_grads();
            let seed_state = carry.as_ref().and_then(|s| s.take_rows(idx.len()));
            let (pred, cache) =
                model.forward_train(x.view(), seed_state.as_ref(), &mut dropout_rng)?;
            let (loss, dpred) = weighted_task_loss(config.loss, pred.view(), y.view(), &weights)?;
            let penalty = l2_penalty(model, config.l2);
            if !(loss + penalty).is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: loss + penalty,
                });
            }
            model.backward(&cache, dpred.view())?;
            add_l2_grad(model, config.l2);
            opt.step(model)?;
            check_finite(model, epoch, b, loss)?;
            if sampler.carries_state() {
                carry = cache.final_state();
            }
            total += loss * idx.len() as f64;
        }
        history.push(total / train.len() as f64);
    }
    Ok(history)
}
