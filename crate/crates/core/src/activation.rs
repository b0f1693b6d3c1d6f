//! Scalar activations and their derivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The feedforward nonlinearity applied throughout the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Mish,
    Relu,
    /// Tanh approximation of GELU.
    Gelu,
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Mish => mish(x),
            ActivationKind::Relu => relu(x),
            ActivationKind::Gelu => gelu(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Mish => mish_prime(x),
            ActivationKind::Relu => relu_prime(x),
            ActivationKind::Gelu => gelu_prime(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Mish => "mish",
            ActivationKind::Relu => "relu",
            ActivationKind::Gelu => "gelu",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mish" => Ok(ActivationKind::Mish),
            "relu" => Ok(ActivationKind::Relu),
            "gelu" => Ok(ActivationKind::Gelu),
            other => Err(Error::Config(format!(
                "unknown activation '{other}' (expected mish, relu or gelu)"
            ))),
        }
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
pub fn softplus_stable(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, evaluated on the side that cannot overflow.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x * tanh(softplus(x))`.
pub fn mish(x: f64) -> f64 {
    x * softplus_stable(x).tanh()
}

/// Derivative of [`mish`]: `tanh(s) + x * (1 - tanh(s)^2) * logistic(x)` with
/// `s = softplus(x)`, since `d softplus / dx` is the logistic function.
pub fn mish_prime(x: f64) -> f64 {
    let t = softplus_stable(x).tanh();
    t + x * (1.0 - t * t) * logistic(x)
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Subgradient choice at zero is 0.
pub fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

const GELU_C: f64 = 0.044_715;
// sqrt(2 / pi)
const GELU_K: f64 = 0.797_884_560_802_865_4;

pub fn gelu(x: f64) -> f64 {
    let u = GELU_K * (x + GELU_C * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub fn gelu_prime(x: f64) -> f64 {
    let u = GELU_K * (x + GELU_C * x * x * x);
    let t = u.tanh();
    let du = GELU_K * (1.0 + 3.0 * GELU_C * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}
