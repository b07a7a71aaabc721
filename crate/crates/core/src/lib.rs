//! Core library for a hands-on variational autoencoder toolkit.
//!
//! * [`numerics`]: tensors and hand-written gradients.
//! * [`vae`]: encoder/decoder model, negative-ELBO loss and checkpoints.
//! * [`trainer`]: seeded minibatch Adam training with a freeze option.
//! * [`dataset`]: MNIST IDX files, drawn-stroke rasterization, persistence.
//! * [`media`]: latent interpolation, PGM and GIF89a output.
//! * [`game`]: the deterministic shadow-matching game engine.

pub mod dataset;
pub mod game;
pub mod media;
pub mod numerics;
pub mod trainer;
pub mod vae;

/// Side length of every digit image.
pub const IMAGE_SIDE: usize = 28;
/// Pixels per digit image.
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
