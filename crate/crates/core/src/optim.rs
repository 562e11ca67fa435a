//! Initialization, SGD and Adam updates, and the L2 weight penalty.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`. Parameter array `k` (in visit order) draws from
//! stream `k` of that generator, so adding a layer never shifts the draws
//! of the layers before it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{ParamKind, Parameters};

pub const RNG_ALGORITHM: &str = "chacha8";

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Uniform in `[-c, c]`, `c = sqrt(6 / (fan_in + fan_out))`.
    XavierUniform,
    /// Normal with mean 0 and std `sqrt(2 / fan_in)`.
    HeNormal,
    Zeros,
}

impl InitScheme {
    pub fn name(self) -> &'static str {
        match self {
            InitScheme::XavierUniform => "xavier",
            InitScheme::HeNormal => "he",
            InitScheme::Zeros => "zeros",
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "xavier" => Ok(InitScheme::XavierUniform),
            "he" => Ok(InitScheme::HeNormal),
            "zeros" => Ok(InitScheme::Zeros),
            other => Err(Error::InvalidConfig(format!(
                "unknown init scheme '{other}'"
            ))),
        }
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

/// Draw every weight array from `scheme`; biases are set to zero.
pub fn init_params<P: Parameters + ?Sized>(params: &mut P, scheme: InitScheme, seed: u64) {
    let mut stream = 0u64;
    params.visit_mut("", &mut |p| {
        let mut rng = rng_for(seed, stream);
        stream += 1;
        match (p.kind, scheme) {
            (ParamKind::Bias, _) | (_, InitScheme::Zeros) => p.value.fill(0.0),
            (ParamKind::Weight { fan_in, fan_out }, InitScheme::XavierUniform) => {
                let c = xavier_bound(fan_in, fan_out);
                p.value
                    .iter_mut()
                    .for_each(|v| *v = rng.random_range(-c..=c));
            }
            (ParamKind::Weight { fan_in, .. }, InitScheme::HeNormal) => {
                let normal = Normal::new(0.0, he_std(fan_in)).expect("finite std");
                p.value
                    .iter_mut()
                    .for_each(|v| *v = normal.sample(&mut rng));
            }
        }
    });
}

/// `p <- p - lr * g` on raw slices.
pub fn sgd_update(values: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if values.len() != grads.len() {
        return Err(Error::ShapeMismatch(format!(
            "sgd: {} params vs {} grads",
            values.len(),
            grads.len()
        )));
    }
    values.iter_mut().zip(grads).for_each(|(p, g)| *p -= lr * g);
    Ok(())
}

/// Plain gradient step using each parameter's own gradient buffer.
pub fn sgd_step<P: Parameters + ?Sized>(params: &mut P, lr: f64) {
    params.visit_mut("", &mut |p| {
        p.value
            .iter_mut()
            .zip(p.grad.iter())
            .for_each(|(v, g)| *v -= lr * g);
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn for_params<P: Parameters + ?Sized>(params: &P, lr: f64) -> Self {
        Self::new(params.param_count(), lr)
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Bias-corrected Adam update on raw slices.
    pub fn update(&mut self, values: &mut [f64], grads: &[f64]) -> Result<()> {
        if values.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state for {} params, got {} params / {} grads",
                self.m.len(),
                values.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..values.len() {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            values[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// One Adam step over every parameter array, using their gradient buffers.
pub fn adam_step<P: Parameters + ?Sized>(params: &mut P, state: &mut AdamState) -> Result<()> {
    let mut values = params.flat_values();
    let grads = params.flat_grads();
    state.update(&mut values, &grads)?;
    params.set_flat_values(&values);
    Ok(())
}

/// `lambda * sum(w^2)` over weight arrays (biases excluded).
pub fn l2_penalty<P: Parameters + ?Sized>(params: &P, lambda: f64) -> f64 {
    let mut s = 0.0;
    params.visit("", &mut |p| {
        if p.kind.is_weight() {
            s += p.value.iter().map(|w| w * w).sum::<f64>();
        }
    });
    lambda * s
}

/// Add `2 * lambda * w` to the gradient of every weight.
pub fn add_l2_grad<P: Parameters + ?Sized>(params: &mut P, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    params.visit_mut("", &mut |p| {
        if p.kind.is_weight() {
            p.grad
                .iter_mut()
                .zip(p.value.iter())
                .for_each(|(g, w)| *g += 2.0 * lambda * w);
        }
    });
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(AdamState),
}

impl Optimizer {
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P) -> Result<()> {
        match self {
            Optimizer::Sgd { lr } => {
                sgd_step(params, *lr);
                Ok(())
            }
            Optimizer::Adam(state) => adam_step(params, state),
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::nn::{ConvLayerParams, DenseParams};

    fn scalar(p: f64) -> DenseParams {
        let mut d = DenseParams::new(1, 1);
        d.weights.value[[0, 0]] = p;
        d
    }

    #[test]
    fn xavier_bound_example() {
        let c = xavier_bound(25, 1);
        assert!((c - 0.480384461).abs() < 1e-8);
        let mut d = DenseParams::new(25, 1);
        init_params(&mut d, InitScheme::XavierUniform, 7);
        assert!(d.weights.value.iter().all(|w| w.abs() <= c));
        assert!(d.weights.value.iter().any(|&w| w != 0.0));
        assert!(d.bias.value.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn he_std_statistics() {
        // fan_in = 1 * 2, so the std should be 1
        let mut p = ConvLayerParams::new(1, 50_000, 2, 1);
        init_params(&mut p, InitScheme::HeNormal, 99);
        let w = &p.kernel.value;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn init_is_reproducible() {
        let mut a = ConvLayerParams::new(3, 2, 2, 4);
        let mut b = a.clone();
        init_params(&mut a, InitScheme::HeNormal, 1234);
        init_params(&mut b, InitScheme::HeNormal, 1234);
        let bits = |p: &ConvLayerParams| {
            p.flat_values()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        init_params(&mut b, InitScheme::HeNormal, 1235);
        assert_ne!(bits(&a), bits(&b));
    }

    #[test]
    fn sgd_examples() {
        let mut v = [1.0];
        sgd_update(&mut v, &[2.0], 0.1).unwrap();
        assert!((v[0] - 0.8).abs() < 1e-15);
        sgd_update(&mut v, &[2.0], 0.0).unwrap();
        assert!((v[0] - 0.8).abs() < 1e-15);
        sgd_update(&mut v, &[0.0], 0.5).unwrap();
        assert!((v[0] - 0.8).abs() < 1e-15);
        assert!(sgd_update(&mut v, &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn adam_first_step() {
        let mut s = AdamState::new(1, 1e-3);
        let mut v = [0.0];
        s.update(&mut v, &[1.0]).unwrap();
        assert!((v[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
        assert!((v[0] + 9.99999e-4).abs() < 1e-9);
        assert_eq!(s.t, 1);

        let mut s = AdamState::new(1, 1e-3);
        let mut v = [0.4];
        s.update(&mut v, &[0.0]).unwrap();
        assert_eq!(v[0], 0.4);
        assert!(s.update(&mut v, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn adam_first_step_scale_invariant() {
        let step = |g: f64| {
            let mut s = AdamState::new(1, 1e-3);
            let mut v = [0.0];
            s.update(&mut v, &[g]).unwrap();
            v[0].abs()
        };
        let (a, b) = (step(10.0), step(0.1));
        assert!((a - b).abs() / a < 1e-6);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut d = scalar(0.0);
        let mut s = AdamState::for_params(&d, 0.1);
        for _ in 0..200 {
            d.zero_grads();
            let p = d.weights.value[[0, 0]];
            d.weights.grad[[0, 0]] = 2.0 * (p - 3.0);
            adam_step(&mut d, &mut s).unwrap();
        }
        assert!((d.weights.value[[0, 0]] - 3.0).abs() < 0.05);
        assert_eq!(s.t, 200);
    }

    #[test]
    fn l2_examples() {
        let mut d = DenseParams::new(2, 1);
        d.weights.value[[0, 0]] = 1.0;
        d.weights.value[[1, 0]] = 2.0;
        d.bias.value[0] = 10.0;
        assert!((l2_penalty(&d, 0.001) - 0.005).abs() < 1e-15);
        assert_eq!(l2_penalty(&d, 0.0), 0.0);

        let mut d = scalar(3.0);
        add_l2_grad(&mut d, 0.001);
        assert!((d.weights.grad[[0, 0]] - 0.006).abs() < 1e-15);
        assert_eq!(d.bias.grad[0], 0.0);
        let before = d.flat_grads();
        add_l2_grad(&mut d, 0.0);
        assert_eq!(before, d.flat_grads());
    }

    proptest! {
        #[test]
        fn xavier_draws_within_bound(fan_in in 1usize..40, fan_out in 1usize..40, seed: u64) {
            let mut d = DenseParams::new(fan_in, fan_out);
            init_params(&mut d, InitScheme::XavierUniform, seed);
            let c = xavier_bound(fan_in, fan_out);
            prop_assert!(d.weights.value.iter().all(|w| w.abs() <= c));
        }

        #[test]
        fn adam_state_stays_finite(grads in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            let mut s = AdamState::new(1, 1e-3);
            let mut v = [0.0];
            let mut last_t = 0;
            for g in grads {
                s.update(&mut v, &[g]).unwrap();
                prop_assert!(s.t > last_t);
                last_t = s.t;
                prop_assert!(s.first_moment()[0].is_finite() && s.second_moment()[0].is_finite());
            }
        }
    }
}
