use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean absolute error and its subgradient `sign(pred - target) / n`.
pub fn mae_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_pair(pred, target)?;
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| sign(p - t) / n)
        .collect();
    Ok((loss, grad))
}

/// Mean squared error and its gradient `2 (pred - target) / n`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_pair(pred, target)?;
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Ok((loss, grad))
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    Ok(mse_loss(pred, truth)?.0.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mae,
    Mse,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mae => "mae",
            LossKind::Mse => "mse",
        }
    }

    pub fn eval(self, pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            LossKind::Mae => mae_loss(pred, target),
            LossKind::Mse => mse_loss(pred, target),
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mae" => Ok(LossKind::Mae),
            "mse" => Ok(LossKind::Mse),
            other => Err(Error::InvalidConfig(format!("unknown loss '{other}'"))),
        }
    }
}

/// Per-task weights must be positive and sum to one.
pub fn check_task_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::WeightMismatch(format!(
            "weights must be non-negative: {weights:?}"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightMismatch(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// `sum_j w_j * loss_j` over task columns of `pred`/`target` (batch x tasks).
/// Weights are not normalized here, so scaling them scales the loss.
pub fn weighted_task_loss(
    kind: LossKind,
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
    weights: &[f64],
) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs targets {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if weights.len() != pred.ncols() {
        return Err(Error::WeightMismatch(format!(
            "{} weights for {} tasks",
            weights.len(),
            pred.ncols()
        )));
    }
    let mut grad = Array2::zeros(pred.raw_dim());
    let mut total = 0.0;
    for (j, &w) in weights.iter().enumerate() {
        let p = pred.column(j).to_vec();
        let t = target.column(j).to_vec();
        let (l, g) = kind.eval(&p, &t)?;
        total += w * l;
        for (i, gi) in g.into_iter().enumerate() {
            grad[[i, j]] = w * gi;
        }
    }
    Ok((total, grad))
}

/// Weighted sum of per-task MAE over the three trajectories.
pub fn multitask_loss(
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
    weights: &[f64],
) -> Result<f64> {
    if weights.len() != 3 {
        return Err(Error::WeightMismatch(format!(
            "expected 3 task weights, got {}",
            weights.len()
        )));
    }
    check_task_weights(weights)?;
    Ok(weighted_task_loss(LossKind::Mae, pred, target, weights)?.0)
}
