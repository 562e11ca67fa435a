pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Derivative of relu, 0 at the kink.
pub fn relu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Logistic sigmoid, branching on sign so `exp` never overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

pub fn tanh_derivative(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => tanh(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the forward output `y = apply(x)`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => relu_derivative(y),
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(relu(-2.0), 0.0);
        assert_eq!(relu(3.0), 3.0);
        assert_eq!(relu_derivative(0.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
    }

    #[test]
    fn sigmoid_is_stable_far_out() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!(sigmoid(-40.0) > 0.0);
        assert!((sigmoid(100.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let eps = 1e-6;
        type Pair = (fn(f64) -> f64, fn(f64) -> f64);
        let cases: [Pair; 3] = [
            (relu, relu_derivative),
            (sigmoid, sigmoid_derivative),
            (tanh, tanh_derivative),
        ];
        for (f, df) in cases {
            for x in [-1.0, 0.5, 2.0] {
                let numeric = (f(x + eps) - f(x - eps)) / (2.0 * eps);
                let analytic = df(x);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                assert!(rel < 1e-8, "x={x}: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn derivative_from_output_agrees() {
        for x in [-1.3, -0.2, 0.7, 2.5] {
            for (a, d) in [
                (Activation::Relu, relu_derivative(x)),
                (Activation::Sigmoid, sigmoid_derivative(x)),
                (Activation::Tanh, tanh_derivative(x)),
                (Activation::Identity, 1.0),
            ] {
                assert!((a.derivative_from_output(a.apply(x)) - d).abs() < 1e-15);
            }
        }
    }
}
