//! The variational autoencoder: a one-hidden-layer MLP encoder emitting a
//! Gaussian posterior per image and a mirrored decoder emitting Bernoulli
//! pixel probabilities.

mod checkpoint;
mod loss;
mod model;

pub use checkpoint::{CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{kl_divergence, loss, LossParts};
pub use model::{
    reparameterize, reparameterize_with, sample_noise, ForwardPass, LatentCode, LayerId, VaeModel,
    DEFAULT_HIDDEN_DIM, DEFAULT_LATENT_DIM, LOGIT_CLAMP, LOGVAR_CLAMP,
};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Dimension(#[from] NumericsError),
    #[error("invalid model dimensions: hidden={hidden}, latent={latent}")]
    InvalidDims { hidden: usize, latent: usize },
}
