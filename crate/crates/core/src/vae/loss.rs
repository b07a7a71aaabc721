use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numerics::Tensor;

/// Negative ELBO split into its two terms, each averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub bce: f64,
    pub kl: f64,
}

/// Bernoulli reconstruction error (summed over pixels) plus the closed-form
/// KL divergence from N(mu, exp(logvar)) to N(0, I), both batch means.
pub fn loss(x: &Tensor, x_hat: &Tensor, mu: &Tensor, logvar: &Tensor) -> Result<LossParts, ModelError> {
    x.expect_shape("loss", x_hat.shape())?;
    let batch = x.rows() as f64;
    let mut bce = 0.0;
    for (&t, &p) in x.data().iter().zip(x_hat.data()) {
        // Skip zero-weight terms so a saturated probability cannot produce 0·∞.
        if t > 0.0 {
            bce -= t * p.ln();
        }
        if t < 1.0 {
            bce -= (1.0 - t) * (1.0 - p).ln();
        }
    }
    let bce = bce / batch;
    let kl = kl_divergence(mu, logvar)?;
    Ok(LossParts {
        total: bce + kl,
        bce,
        kl,
    })
}

/// `−½ Σ (1 + logvar − mu² − exp(logvar))`, averaged over the batch rows.
pub fn kl_divergence(mu: &Tensor, logvar: &Tensor) -> Result<f64, ModelError> {
    mu.expect_shape("kl_divergence", logvar.shape())?;
    let sum: f64 = mu
        .data()
        .iter()
        .zip(logvar.data())
        .map(|(&m, &lv)| 1.0 + lv - m * m - lv.exp())
        .sum();
    Ok(-0.5 * sum / mu.rows() as f64)
}
