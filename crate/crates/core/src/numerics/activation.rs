use serde::{Deserialize, Serialize};

use super::{Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => sigmoid(v),
        }
    }

    pub fn forward(self, x: &Tensor) -> Tensor {
        x.map(|v| self.apply(v))
    }

    /// Gradient with respect to the pre-activation input `x`.
    /// ReLU's subgradient at exactly zero is taken as 0.
    pub fn backward(self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        match self {
            Activation::Relu => x.zip_map(grad_out, "relu_backward", |v, g| if v > 0.0 { g } else { 0.0 }),
            Activation::Sigmoid => x.zip_map(grad_out, "sigmoid_backward", |v, g| {
                let s = sigmoid(v);
                s * (1.0 - s) * g
            }),
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
