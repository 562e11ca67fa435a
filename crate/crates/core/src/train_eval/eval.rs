use std::io::Write;

use ndarray::Array2;

use super::loss::rmse;
use crate::error::{Error, Result};
use crate::lorenz::{ScaleTransform, Series, WindowedDataset};
use crate::models::{LstmState, Model};
use crate::par;

/// Test-set predictions and RMSE for one output series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEval {
    pub series: Series,
    /// Series index of every target.
    pub t: Vec<usize>,
    pub truth: Vec<f64>,
    pub prediction: Vec<f64>,
    pub rmse_scaled: f64,
    /// RMSE after mapping both sides back to the original units, when the
    /// scale is known.
    pub rmse_raw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub series: Vec<SeriesEval>,
}

impl Evaluation {
    pub fn get(&self, s: Series) -> Option<&SeriesEval> {
        self.series.iter().find(|e| e.series == s)
    }

    /// `series,t,truth,prediction` rows in scaled units.
    pub fn write_predictions_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "series,t,truth,prediction")?;
        for e in &self.series {
            for k in 0..e.t.len() {
                writeln!(
                    w,
                    "{},{},{:.16e},{:.16e}",
                    e.series, e.t[k], e.truth[k], e.prediction[k]
                )?;
            }
        }
        Ok(())
    }
}

/// Score a full prediction matrix (examples x tasks) against `test`.
pub fn evaluate_predictions(
    test: &WindowedDataset,
    predictions: &Array2<f64>,
    scale: Option<&[ScaleTransform; 3]>,
) -> Result<Evaluation> {
    if predictions.dim() != test.targets.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} predictions for {:?} targets",
            predictions.dim(),
            test.targets.dim()
        )));
    }
    let mut series = Vec::with_capacity(test.n_tasks());
    for (j, &s) in test.target_series.iter().enumerate() {
        let truth = test.targets.column(j).to_vec();
        let prediction = predictions.column(j).to_vec();
        let rmse_scaled = rmse(&prediction, &truth)?;
        let rmse_raw = match scale {
            Some(tf) => {
                let tf = tf[s.index()];
                let inv = |v: &[f64]| v.iter().map(|&x| tf.invert(x)).collect::<Vec<_>>();
                Some(rmse(&inv(&prediction), &inv(&truth))?)
            }
            None => None,
        };
        series.push(SeriesEval {
            series: s,
            t: test.target_index.clone(),
            truth,
            prediction,
            rmse_scaled,
            rmse_raw,
        });
    }
    Ok(Evaluation { series })
}

/// One-step-ahead predictions for every test example, one example per
/// batch with dropout off. With `carry_state` the LSTM state runs through
/// the test examples in order, starting from zero; otherwise examples are
/// independent and are predicted in parallel.
pub fn predict_dataset(
    model: &Model,
    test: &WindowedDataset,
    carry_state: bool,
) -> Result<Array2<f64>> {
    if test.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if test.channels != model.in_channels()
        || test.n_tasks() != model.n_tasks()
        || test.layout != model.layout()
        || test.window < model.window()
    {
        return Err(Error::ShapeMismatch(format!(
            "test windows ({} channels x {}, {} tasks, {:?}) do not fit the model ({} channels x {}, {} tasks, {:?})",
            test.channels,
            test.window,
            test.n_tasks(),
            test.layout,
            model.in_channels(),
            model.window(),
            model.n_tasks(),
            model.layout()
        )));
    }
    let n = test.len();
    let mut out = Array2::zeros((n, model.n_tasks()));
    if carry_state {
        let mut state: Option<LstmState> = None;
        for i in 0..n {
            let (x, _) = test.batch(&[i]);
            let (y, cache) = model.forward_eval(x.view(), state.as_ref())?;
            out.row_mut(i).assign(&y.row(0));
            state = cache.final_state();
        }
    } else {
        let rows = par::map_range(n, |i| model.predict(test.batch(&[i]).0.view()));
        for (i, r) in rows.into_iter().enumerate() {
            out.row_mut(i).assign(&r?.row(0));
        }
    }
    Ok(out)
}

pub fn evaluate(
    model: &Model,
    test: &WindowedDataset,
    scale: Option<&[ScaleTransform; 3]>,
    carry_state: bool,
) -> Result<Evaluation> {
    let preds = predict_dataset(model, test, carry_state)?;
    evaluate_predictions(test, &preds, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorenz::{generate_scaled, train_test_windows, Layout, WindowSpec};
    use crate::models::{ModelKind, WaveNetParams};
    use crate::train_eval::{build_model, TrainConfig};

    fn test_set(multitask: bool) -> (crate::lorenz::SeriesSet, WindowedDataset) {
        let set = generate_scaled(crate::lorenz::Scenario::A).unwrap();
        let spec = WindowSpec {
            window: 16,
            conditional: multitask,
            multitask,
            target: Series::X,
            layout: Layout::Conv,
        };
        let (_, test) = train_test_windows(&set, &spec, 1000, 500).unwrap();
        (set, test)
    }

    #[test]
    fn oracle_scores_zero() {
        let (set, test) = test_set(true);
        let e = evaluate_predictions(&test, &test.targets, set.scale.as_ref()).unwrap();
        assert_eq!(e.series.len(), 3);
        for s in &e.series {
            assert_eq!(s.rmse_scaled, 0.0);
            assert_eq!(s.rmse_raw, Some(0.0));
            assert_eq!(s.t.len(), 500);
            assert_eq!(s.t[0], 1000);
        }
    }

    #[test]
    fn zero_model_scores_target_rms() {
        let (set, test) = test_set(false);
        let model = WaveNetParams::new(Default::default()).unwrap();
        let e = evaluate(&Model::WaveNet(model), &test, set.scale.as_ref(), false).unwrap();
        let t = test.targets.column(0);
        let rms = (t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64).sqrt();
        assert!((e.series[0].rmse_scaled - rms).abs() < 1e-15);
        // raw rmse is the scaled one divided by the gain
        let gain = set.scale.unwrap()[0].gain;
        assert!((e.series[0].rmse_raw.unwrap() - rms / gain).abs() < 1e-9);
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let (_, test) = test_set(true);
        let model = build_model(&TrainConfig::new(ModelKind::WaveNet)).unwrap();
        assert!(matches!(
            evaluate(&model, &test, None, false),
            Err(Error::ShapeMismatch(_))
        ));
        let bad = Array2::zeros((499, 3));
        assert!(evaluate_predictions(&test, &bad, None).is_err());
    }

    #[test]
    fn per_example_predictions_match_batched() {
        let c = TrainConfig::new(ModelKind::WaveNet);
        let model = build_model(&c).unwrap();
        let (_, test) = test_set(false);
        let one = predict_dataset(&model, &test, false).unwrap();
        let all = model.predict(test.inputs.view()).unwrap();
        assert_eq!(one, all);
    }

    #[test]
    fn carried_state_differs_from_fresh_state() {
        let c = TrainConfig {
            sampling: crate::train_eval::SamplingMode::Adjacent,
            ..TrainConfig::new(ModelKind::Lstm)
        };
        let model = build_model(&c).unwrap();
        let set = generate_scaled(c.scenario).unwrap();
        let (_, test) = train_test_windows(&set, &c.window_spec(), 1000, 500).unwrap();
        let fresh = predict_dataset(&model, &test, false).unwrap();
        let carried = predict_dataset(&model, &test, true).unwrap();
        // the first example starts from zero either way
        assert_eq!(fresh.row(0), carried.row(0));
        assert_ne!(fresh, carried);
    }
}
