//! Finite-difference gradient checks over every model family.

use std::fmt::Write as _;

use ndarray::{Array2, Array3};
use rand::Rng;

use crate::lorenz::Layout;
use crate::models::{Model, ModelKind};
use crate::nn::{grad_check, GradCheckReport, Parameters};
use crate::optim::rng_for;
use crate::train_eval::{build_model, weighted_task_loss, LossKind, TrainConfig};

pub const CONV_DENSE_THRESHOLD: f64 = 1e-5;
pub const LSTM_THRESHOLD: f64 = 1e-4;

const PROBE_BATCH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckCase {
    pub family: ModelKind,
    pub variant: &'static str,
    pub threshold: f64,
    pub report: GradCheckReport,
}

impl GradCheckCase {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error < self.threshold
    }
}

fn variants() -> Vec<(&'static str, TrainConfig)> {
    let w = TrainConfig::new(ModelKind::WaveNet);
    let l = TrainConfig::new(ModelKind::Lstm);
    vec![
        ("unconditional", TrainConfig::new(ModelKind::Ffn)),
        ("unconditional", w.clone()),
        (
            "conditional",
            TrainConfig {
                conditional: true,
                ..w.clone()
            },
        ),
        (
            "conditional multitask",
            TrainConfig {
                conditional: true,
                multitask: true,
                ..w.clone()
            },
        ),
        (
            "conditional 3-channel stack",
            TrainConfig {
                conditional: true,
                stack_channels: 3,
                ..w
            },
        ),
        ("unconditional", l.clone()),
        (
            "conditional",
            TrainConfig {
                conditional: true,
                ..l
            },
        ),
    ]
}

/// Check one freshly initialized model on random windows in [-1, 1] against
/// random targets with a squared-error loss. `corrupt` scales the analytic
/// gradient by 1.01, a negative control that must fail.
///
/// Real Lorenz windows are smooth and small, which leaves some recurrent
/// derivatives near 1e-10, below what a central difference at eps = 1e-5
/// can resolve in double precision; random windows avoid that.
pub fn check_model(
    config: &TrainConfig,
    eps: f64,
    corrupt: bool,
) -> crate::Result<GradCheckReport> {
    let model = build_model(config)?;
    let mut rng = rng_for(config.seed, 1 << 40);
    let (c, w) = (model.in_channels(), model.window());
    let x = match model.layout() {
        Layout::Conv => Array3::from_shape_fn((PROBE_BATCH, c, w), |_| rng.random_range(-1.0..1.0)),
        Layout::Recurrent => {
            Array3::from_shape_fn((w, PROBE_BATCH, c), |_| rng.random_range(-1.0..1.0))
        }
    };
    let targets = Array2::from_shape_fn((PROBE_BATCH, model.n_tasks()), |_| {
        rng.random_range(-0.5..0.5)
    });
    let weights = vec![1.0; model.n_tasks()];

    let loss_and_grad = |m: &mut Model| {
        let (pred, cache) = m
            .forward_eval(x.view(), None)
            .expect("probe shapes match the model");
        let (loss, dpred) =
            weighted_task_loss(LossKind::Mse, pred.view(), targets.view(), &weights)
                .expect("non-empty probe batch");
        m.backward(&cache, dpred.view())
            .expect("cache matches the model");
        if corrupt {
            m.visit_mut("", &mut |p| p.grad.iter_mut().for_each(|g| *g *= 1.01));
        }
        loss
    };
    Ok(grad_check(&model, loss_and_grad, eps))
}

pub fn grad_check_suite(seed: u64, eps: f64, corrupt: bool) -> crate::Result<Vec<GradCheckCase>> {
    variants()
        .into_iter()
        .map(|(variant, c)| {
            let config = TrainConfig { seed, ..c };
            let report = check_model(&config, eps, corrupt)?;
            let threshold = if config.model == ModelKind::Lstm {
                LSTM_THRESHOLD
            } else {
                CONV_DENSE_THRESHOLD
            };
            Ok(GradCheckCase {
                family: config.model,
                variant,
                threshold,
                report,
            })
        })
        .collect()
}

pub fn format_table(cases: &[GradCheckCase]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<8} {:<28} {:<16} {:>12} {:>12} {:>10}  result",
        "family", "variant", "group", "max_rel_err", "max_abs_err", "threshold"
    );
    for c in cases {
        for g in &c.report.groups {
            let verdict = if g.max_rel_error < c.threshold {
                "ok"
            } else {
                "FAIL"
            };
            let _ = writeln!(
                out,
                "{:<8} {:<28} {:<16} {:>12.3e} {:>12.3e} {:>10.0e}  {verdict}",
                c.family.name(),
                c.variant,
                g.name,
                g.max_rel_error,
                g.max_abs_error,
                c.threshold
            );
        }
    }
    let failed = cases.iter().filter(|c| !c.passed()).count();
    let _ = writeln!(
        out,
        "{} of {} models passed",
        cases.len() - failed,
        cases.len()
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenet_and_ffn_pass() {
        for (_, c) in variants()
            .into_iter()
            .filter(|(_, c)| c.model != ModelKind::Lstm)
        {
            let r = check_model(&c, 1e-5, false).unwrap();
            assert!(r.max_rel_error < CONV_DENSE_THRESHOLD, "{c:?}: {r:?}");
        }
    }

    #[test]
    fn default_seed_passes_and_repeats() {
        let a = grad_check_suite(1234, 1e-5, false).unwrap();
        assert!(a.iter().all(GradCheckCase::passed), "{}", format_table(&a));
        assert_eq!(a, grad_check_suite(1234, 1e-5, false).unwrap());
    }

    /// Over other seeds a handful of LSTM components can fall below the
    /// central-difference resolution; their absolute error still sits at
    /// the rounding floor, far below any real gradient mistake.
    #[test]
    fn other_seeds_agree_to_rounding() {
        for seed in [1235, 42, 7] {
            for c in grad_check_suite(seed, 1e-5, false).unwrap() {
                if c.family != ModelKind::Lstm {
                    assert!(c.passed(), "seed {seed}: {}", format_table(&[c]));
                } else {
                    assert!(
                        c.report.max_abs_error < 1e-9,
                        "seed {seed}: {}",
                        format_table(&[c])
                    );
                }
            }
        }
    }

    #[test]
    fn corrupted_gradient_fails() {
        for c in grad_check_suite(1234, 1e-5, true).unwrap() {
            assert!(!c.passed());
            assert!(c.report.max_rel_error > 5e-3);
        }
    }
}
