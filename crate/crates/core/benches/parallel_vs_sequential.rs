//! Pooled (`par::map*`) versus plain iterator versions of the two fan-out
//! points: per-example test predictions and independent grid jobs.
//!
//! Under `--no-default-features` the pooled path is itself sequential, so
//! the two columns should then match.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lorenzcast::cli::{default_grid, run_job};
use lorenzcast::models::{Model, ModelKind};
use lorenzcast::par;
use lorenzcast::train_eval::{build_model, prepare_data, TrainConfig};

fn pooled_label() -> &'static str {
    if par::is_parallel() {
        "rayon"
    } else {
        "fallback"
    }
}

fn predict_one(model: &Model, inputs: ndarray::ArrayView3<f64>) -> f64 {
    model.predict(inputs).expect("shapes match")[[0, 0]]
}

fn eval_predictions(c: &mut Criterion) {
    let mut g = c.benchmark_group("eval_predictions");
    for (name, config) in [
        (
            "wavenet_cond",
            TrainConfig {
                conditional: true,
                ..TrainConfig::new(ModelKind::WaveNet)
            },
        ),
        (
            "lstm_cond",
            TrainConfig {
                conditional: true,
                ..TrainConfig::new(ModelKind::Lstm)
            },
        ),
    ] {
        let model = build_model(&config).unwrap();
        let test = prepare_data(&config).unwrap().test;
        let n = test.len();
        g.bench_function(BenchmarkId::new(pooled_label(), name), |b| {
            b.iter(|| par::map_range(n, |i| predict_one(&model, test.batch(&[i]).0.view())))
        });
        g.bench_function(BenchmarkId::new("sequential", name), |b| {
            b.iter(|| {
                (0..n)
                    .map(|i| predict_one(&model, test.batch(&[i]).0.view()))
                    .collect::<Vec<_>>()
            })
        });
    }
    g.finish();
}

fn grid_jobs(c: &mut Criterion) {
    let cell = default_grid()
        .into_iter()
        .find(|c| c.name == "ffn-a")
        .unwrap();
    let seeds = [1234u64, 1235, 42];
    let mut g = c.benchmark_group("grid_jobs");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new(pooled_label(), "ffn_3_seeds"), |b| {
        b.iter(|| par::map(&seeds, |&s| run_job(&cell, s, Some(20)).unwrap()))
    });
    g.bench_function(BenchmarkId::new("sequential", "ffn_3_seeds"), |b| {
        b.iter(|| {
            seeds
                .iter()
                .map(|&s| run_job(&cell, s, Some(20)).unwrap())
                .collect::<Vec<_>>()
        })
    });
    g.finish();
}

criterion_group!(benches, eval_predictions, grid_jobs);
criterion_main!(benches);
