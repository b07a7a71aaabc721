//! Dense tensors and hand-derived gradients for the handful of layer kinds the
//! autoencoder needs.

mod activation;
mod layer;
mod tensor;

pub use activation::Activation;
pub use layer::{LinearLayer, ParamKind};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch in {op}: expected {expected:?}, got {got:?}")]
    Dimension {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid shape {shape:?} for {len} values")]
    Shape { shape: Vec<usize>, len: usize },
}

pub type Result<T> = std::result::Result<T, NumericsError>;
