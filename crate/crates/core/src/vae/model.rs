use rand::Rng;
use rand_distr::StandardNormal;

use super::loss::{loss, LossParts};
use super::ModelError;
use crate::numerics::{Activation, LinearLayer, Tensor};
use crate::IMAGE_PIXELS;

pub const DEFAULT_HIDDEN_DIM: usize = 512;
pub const DEFAULT_LATENT_DIM: usize = 2;

/// Encoder log-variances are clamped to this range before use.
pub const LOGVAR_CLAMP: f64 = 10.0;
/// Decoder logits are clamped to this range before the sigmoid, which keeps
/// every pixel probability strictly inside (0, 1) in f64.
pub const LOGIT_CLAMP: f64 = 30.0;

/// Layers in forward order. The discriminants double as the freeze index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LayerId {
    EncHidden = 0,
    EncMu = 1,
    EncLogvar = 2,
    DecHidden = 3,
    DecOut = 4,
}

impl LayerId {
    pub const ALL: [LayerId; 5] = [
        LayerId::EncHidden,
        LayerId::EncMu,
        LayerId::EncLogvar,
        LayerId::DecHidden,
        LayerId::DecOut,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerId::EncHidden => "enc_hidden",
            LayerId::EncMu => "enc_mu",
            LayerId::EncLogvar => "enc_logvar",
            LayerId::DecHidden => "dec_hidden",
            LayerId::DecOut => "dec_out",
        }
    }

    pub fn is_encoder(self) -> bool {
        self.index() <= LayerId::EncLogvar.index()
    }
}

/// Posterior parameters for a batch, each `[batch, latent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub mu: Tensor,
    pub logvar: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    hidden_dim: usize,
    latent_dim: usize,
    layers: [LinearLayer; 5],
}

impl VaeModel {
    /// Glorot-initialised model drawn from `rng`.
    pub fn new<R: Rng + ?Sized>(hidden_dim: usize, latent_dim: usize, rng: &mut R) -> Result<Self, ModelError> {
        check_dims(hidden_dim, latent_dim)?;
        Ok(Self {
            hidden_dim,
            latent_dim,
            layers: [
                LinearLayer::glorot(IMAGE_PIXELS, hidden_dim, rng),
                LinearLayer::glorot(hidden_dim, latent_dim, rng),
                LinearLayer::glorot(hidden_dim, latent_dim, rng),
                LinearLayer::glorot(latent_dim, hidden_dim, rng),
                LinearLayer::glorot(hidden_dim, IMAGE_PIXELS, rng),
            ],
        })
    }

    /// All-zero parameters.
    pub fn zeros(hidden_dim: usize, latent_dim: usize) -> Result<Self, ModelError> {
        check_dims(hidden_dim, latent_dim)?;
        Ok(Self {
            hidden_dim,
            latent_dim,
            layers: [
                LinearLayer::zeros(IMAGE_PIXELS, hidden_dim),
                LinearLayer::zeros(hidden_dim, latent_dim),
                LinearLayer::zeros(hidden_dim, latent_dim),
                LinearLayer::zeros(latent_dim, hidden_dim),
                LinearLayer::zeros(hidden_dim, IMAGE_PIXELS),
            ],
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn layer(&self, id: LayerId) -> &LinearLayer {
        &self.layers[id.index()]
    }

    pub fn layer_mut(&mut self, id: LayerId) -> &mut LinearLayer {
        &mut self.layers[id.index()]
    }

    pub fn layers(&self) -> impl Iterator<Item = (LayerId, &LinearLayer)> {
        LayerId::ALL.into_iter().zip(self.layers.iter())
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = (LayerId, &mut LinearLayer)> {
        LayerId::ALL.into_iter().zip(self.layers.iter_mut())
    }

    /// Freezes every layer whose index is `<= up_to`, unfreezing the rest.
    /// `None` unfreezes everything.
    pub fn freeze_up_to(&mut self, up_to: Option<usize>) {
        for (id, layer) in self.layers_mut() {
            layer.set_frozen(up_to.is_some_and(|limit| id.index() <= limit));
        }
    }

    pub fn zero_grads(&mut self) {
        self.layers.iter_mut().for_each(LinearLayer::zero_grads);
    }

    pub fn encode(&self, x: &Tensor) -> Result<LatentCode, ModelError> {
        let h = Activation::Relu.forward(&self.layer(LayerId::EncHidden).forward(x)?);
        let mu = self.layer(LayerId::EncMu).forward(&h)?;
        let logvar = self
            .layer(LayerId::EncLogvar)
            .forward(&h)?
            .map(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP));
        Ok(LatentCode { mu, logvar })
    }

    pub fn decode(&self, z: &Tensor) -> Result<Tensor, ModelError> {
        let h = Activation::Relu.forward(&self.layer(LayerId::DecHidden).forward(z)?);
        let logits = self.layer(LayerId::DecOut).forward(&h)?;
        Ok(logits.map(|v| Activation::Sigmoid.apply(v.clamp(-LOGIT_CLAMP, LOGIT_CLAMP))))
    }

    /// Full forward pass with externally supplied noise, keeping every
    /// intermediate needed by [`backward`](Self::backward).
    pub fn forward(&self, x: &Tensor, eps: &Tensor) -> Result<ForwardPass, ModelError> {
        let enc_pre = self.layer(LayerId::EncHidden).forward(x)?;
        let enc_h = Activation::Relu.forward(&enc_pre);
        let mu = self.layer(LayerId::EncMu).forward(&enc_h)?;
        let logvar_raw = self.layer(LayerId::EncLogvar).forward(&enc_h)?;
        let logvar = logvar_raw.map(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP));
        let z = reparameterize_with(&mu, &logvar, eps)?;
        let dec_pre = self.layer(LayerId::DecHidden).forward(&z)?;
        let dec_h = Activation::Relu.forward(&dec_pre);
        let logits_raw = self.layer(LayerId::DecOut).forward(&dec_h)?;
        let x_hat = logits_raw.map(|v| Activation::Sigmoid.apply(v.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)));
        let parts = loss(x, &x_hat, &mu, &logvar)?;
        Ok(ForwardPass {
            x: x.clone(),
            enc_pre,
            enc_h,
            mu,
            logvar_raw,
            logvar,
            eps: eps.clone(),
            dec_pre,
            dec_h,
            logits_raw,
            x_hat,
            loss: parts,
        })
    }

    /// Accumulates gradients of the batch-mean total loss into every unfrozen
    /// layer. The noise in `pass` is treated as a constant.
    pub fn backward(&mut self, pass: &ForwardPass) -> Result<(), ModelError> {
        let batch = pass.x.rows() as f64;
        let inv = 1.0 / batch;

        // d(bce)/d(logit) = x_hat - x, zero where the logit clamp saturates.
        let mut g_logits = pass.x_hat.zip_map(&pass.x, "bce_backward", |p, t| (p - t) * inv)?;
        for (g, &raw) in g_logits.data_mut().iter_mut().zip(pass.logits_raw.data()) {
            if raw.abs() > LOGIT_CLAMP {
                *g = 0.0;
            }
        }
        let g_dec_h = self.layer_mut(LayerId::DecOut).backward(&pass.dec_h, &g_logits)?;
        let g_dec_pre = Activation::Relu.backward(&pass.dec_pre, &g_dec_h)?;
        let z = pass.z();
        let g_z = self.layer_mut(LayerId::DecHidden).backward(&z, &g_dec_pre)?;

        // z = mu + exp(logvar/2)·eps, plus the closed-form KL terms.
        let g_mu = g_z.zip_map(&pass.mu, "kl_backward", |g, m| g + m * inv)?;
        let mut g_logvar = Tensor::zeros(pass.logvar.shape());
        for (i, slot) in g_logvar.data_mut().iter_mut().enumerate() {
            let lv = pass.logvar.data()[i];
            let raw = pass.logvar_raw.data()[i];
            if raw.abs() > LOGVAR_CLAMP {
                continue;
            }
            let std = (0.5 * lv).exp();
            *slot = g_z.data()[i] * 0.5 * std * pass.eps.data()[i] + 0.5 * (lv.exp() - 1.0) * inv;
        }

        let g_h_mu = self.layer_mut(LayerId::EncMu).backward(&pass.enc_h, &g_mu)?;
        let g_h_lv = self.layer_mut(LayerId::EncLogvar).backward(&pass.enc_h, &g_logvar)?;
        let g_enc_h = g_h_mu.zip_map(&g_h_lv, "encoder_merge", |a, b| a + b)?;
        let g_enc_pre = Activation::Relu.backward(&pass.enc_pre, &g_enc_h)?;
        self.layer_mut(LayerId::EncHidden).backward_params(&pass.x, &g_enc_pre)?;
        Ok(())
    }
}

fn check_dims(hidden: usize, latent: usize) -> Result<(), ModelError> {
    if hidden == 0 || latent == 0 {
        return Err(ModelError::InvalidDims { hidden, latent });
    }
    Ok(())
}

/// Intermediates of one [`VaeModel::forward`] call.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    x: Tensor,
    enc_pre: Tensor,
    enc_h: Tensor,
    mu: Tensor,
    logvar_raw: Tensor,
    logvar: Tensor,
    eps: Tensor,
    dec_pre: Tensor,
    dec_h: Tensor,
    logits_raw: Tensor,
    x_hat: Tensor,
    loss: LossParts,
}

impl ForwardPass {
    pub fn loss(&self) -> LossParts {
        self.loss
    }

    pub fn x_hat(&self) -> &Tensor {
        &self.x_hat
    }

    pub fn mu(&self) -> &Tensor {
        &self.mu
    }

    pub fn logvar(&self) -> &Tensor {
        &self.logvar
    }

    fn z(&self) -> Tensor {
        reparameterize_with(&self.mu, &self.logvar, &self.eps).expect("shapes checked in forward")
    }
}

/// Standard-normal noise of shape `[batch, latent]`.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, batch: usize, latent: usize) -> Tensor {
    let data = (0..batch * latent).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(vec![batch, latent], data).expect("positive extents")
}

/// `z = mu + exp(logvar/2) ⊙ eps`.
pub fn reparameterize_with(mu: &Tensor, logvar: &Tensor, eps: &Tensor) -> Result<Tensor, ModelError> {
    let std_eps = logvar.zip_map(eps, "reparameterize", |lv, e| (0.5 * lv).exp() * e)?;
    Ok(mu.zip_map(&std_eps, "reparameterize", |m, s| m + s)?)
}

/// Draws `eps ~ N(0, I)` from `rng` and reparameterizes.
pub fn reparameterize<R: Rng + ?Sized>(mu: &Tensor, logvar: &Tensor, rng: &mut R) -> Result<Tensor, ModelError> {
    let mut eps = Tensor::zeros(mu.shape());
    for e in eps.data_mut() {
        *e = rng.sample(StandardNormal);
    }
    reparameterize_with(mu, logvar, &eps)
}
