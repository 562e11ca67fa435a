//! Losses, minibatch sampling, the training loop and test-set evaluation.

mod batch;
mod config;
mod eval;
mod loss;
mod report;
mod train;

pub use batch::{make_batches, BatchSampler, SamplingMode};
pub use config::{parse_pairs, OptimizerKind, TrainConfig, DEFAULT_SEEDS};
pub use eval::{evaluate, evaluate_predictions, predict_dataset, Evaluation, SeriesEval};
pub use loss::{
    check_task_weights, mae_loss, mse_loss, multitask_loss, rmse, weighted_task_loss, LossKind,
};
pub use report::{mean_std, CellKey, EvalReport, ReportRow, SeriesSummary, REPORT_HEADER};
pub use train::{build_model, fit, prepare_data, train, ExperimentData, RunMetadata, TrainOutcome};
