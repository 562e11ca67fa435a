use ndarray::Array2;
use proptest::prelude::*;

use lorenzcast::models::ModelKind;
use lorenzcast::nn::Parameters;
use lorenzcast::optim::AdamState;
use lorenzcast::train_eval::{
    build_model, prepare_data, weighted_task_loss, LossKind, TrainConfig,
};

/// Loss and flat gradient of a multitask model on the first 32 training
/// windows under task weights `w`.
fn loss_and_grads(config: &TrainConfig, w: &[f64]) -> (f64, Vec<f64>) {
    let mut model = build_model(config).unwrap();
    let data = prepare_data(config).unwrap();
    let idx: Vec<usize> = (0..32).collect();
    let (x, y): (_, Array2<f64>) = data.train.batch(&idx);
    let (pred, cache) = model.forward_eval(x.view(), None).unwrap();
    let (loss, dpred) = weighted_task_loss(LossKind::Mae, pred.view(), y.view(), w).unwrap();
    model.backward(&cache, dpred.view()).unwrap();
    (loss, model.flat_grads())
}

fn first_adam_step(grads: &[f64]) -> Vec<f64> {
    let mut values = vec![0.0; grads.len()];
    AdamState::new(grads.len(), 1e-3)
        .update(&mut values, grads)
        .unwrap();
    values
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scaling_task_weights_scales_loss_and_keeps_adam_direction(
        raw in prop::array::uniform3(0.05f64..1.0),
        scale in 0.1f64..10.0,
        seed in 0u64..1000,
    ) {
        let config = TrainConfig {
            conditional: true, multitask: true, stack_channels: 3, seed,
            ..TrainConfig::new(ModelKind::WaveNet)
        };
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let scaled: Vec<f64> = p.iter().map(|v| v * scale).collect();
        let (l1, g1) = loss_and_grads(&config, &p);
        let (l2, g2) = loss_and_grads(&config, &scaled);
        prop_assert!((l2 - scale * l1).abs() <= 1e-12 * l2.abs().max(1e-300));
        for (a, b) in g1.iter().zip(&g2) {
            prop_assert!((b - scale * a).abs() <= 1e-12 * b.abs().max(1e-15));
        }
        // the first Adam step is -lr * g / (|g| + eps): the scale only
        // enters through eps, bounding the difference by lr * eps / min|g|
        let (s1, s2) = (first_adam_step(&g1), first_adam_step(&g2));
        for (((a, b), ga), gb) in s1.iter().zip(&s2).zip(&g1).zip(&g2) {
            prop_assert_eq!(a.signum(), b.signum());
            let bound = 1e-3 * 1e-8 / ga.abs().min(gb.abs()).max(1e-300);
            prop_assert!((a - b).abs() <= bound * (1.0 + 1e-9) + 1e-18, "{a} vs {b}");
        }
    }
}
