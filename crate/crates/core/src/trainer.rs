//! Minibatch training loop.
//!
//! Every source of randomness is a separate ChaCha8 stream derived from the
//! configured seed, so a run is reproducible bit for bit.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DigitDataset;
use crate::numerics::{ParamKind, Tensor};
use crate::vae::{self, sample_noise, LayerId, ModelError, VaeModel, DEFAULT_HIDDEN_DIM, DEFAULT_LATENT_DIM};

/// Seed of the noise stream used by [`evaluate`].
pub const DEFAULT_EVAL_SEED: u64 = 0x5eed_e7a1;

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_NOISE: u64 = 2;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("training cancelled during epoch {epoch}")]
    Cancelled { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Freeze layers `0..=freeze_up_to` (see [`LayerId`]); 2 freezes the encoder.
    pub freeze_up_to: Option<usize>,
    pub latent_dim: usize,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 42,
            freeze_up_to: None,
            latent_dim: DEFAULT_LATENT_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::Config("learning_rate must be a positive number".into()));
        }
        if self.latent_dim == 0 || self.hidden_dim == 0 {
            return Err(TrainError::Config("latent_dim and hidden_dim must be positive".into()));
        }
        if let Some(idx) = self.freeze_up_to {
            if idx >= LayerId::ALL.len() {
                return Err(TrainError::Config(format!(
                    "freeze_up_to={idx} but the model has {} layers",
                    LayerId::ALL.len()
                )));
            }
        }
        Ok(())
    }

    /// Fresh model with this config's dimensions, initialised from the seed.
    pub fn init_model(&self) -> Result<VaeModel, TrainError> {
        self.validate()?;
        Ok(VaeModel::new(self.hidden_dim, self.latent_dim, &mut stream(self.seed, STREAM_INIT))?)
    }
}

/// One line of the progress stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub epoch: usize,
    pub train_total: f64,
    pub train_bce: f64,
    pub train_kl: f64,
    pub test_total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<ProgressEvent>,
    /// Wall-clock milliseconds per epoch; the only non-deterministic field.
    pub wall_time_ms: Vec<u64>,
    pub model_id: String,
}

impl TrainReport {
    /// Equality ignoring wall-clock timings.
    pub fn same_outcome(&self, other: &TrainReport) -> bool {
        self.epochs == other.epochs && self.model_id == other.model_id
    }
}

/// Receives per-epoch progress and may request cancellation, which is
/// polled between batches.
pub trait ProgressSink {
    fn on_epoch(&mut self, event: &ProgressEvent);

    fn should_cancel(&self) -> bool {
        false
    }
}

impl ProgressSink for () {
    fn on_epoch(&mut self, _: &ProgressEvent) {}
}

impl ProgressSink for Vec<ProgressEvent> {
    fn on_epoch(&mut self, event: &ProgressEvent) {
        self.push(event.clone());
    }
}

impl<F: FnMut(&ProgressEvent)> ProgressSink for F {
    fn on_epoch(&mut self, event: &ProgressEvent) {
        self(event)
    }
}

struct AdamMoments {
    m: Vec<f64>,
    v: Vec<f64>,
}

struct Adam {
    lr: f64,
    step: i32,
    // [layer][weights, bias]
    moments: Vec<[AdamMoments; 2]>,
}

impl Adam {
    fn new(model: &VaeModel, lr: f64) -> Self {
        let moments = model
            .layers()
            .map(|(_, l)| {
                [ParamKind::Weights, ParamKind::Bias].map(|k| AdamMoments {
                    m: vec![0.0; l.param(k).len()],
                    v: vec![0.0; l.param(k).len()],
                })
            })
            .collect();
        Self { lr, step: 0, moments }
    }

    fn step(&mut self, model: &mut VaeModel) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step);
        let lr = self.lr;
        for ((_, layer), slots) in model.layers_mut().zip(self.moments.iter_mut()) {
            layer.apply_update(|kind, params, grads| {
                let AdamMoments { m, v } = &mut slots[kind as usize];
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            });
        }
    }
}

/// Per-epoch visiting order of the training split: a fresh seeded shuffle of
/// the same indices every epoch.
pub struct EpochOrder {
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl EpochOrder {
    pub fn new(train: &[usize], seed: u64) -> Self {
        Self {
            order: train.to_vec(),
            rng: stream(seed, STREAM_SHUFFLE),
        }
    }

    pub fn next_epoch(&mut self) -> &[usize] {
        self.order.shuffle(&mut self.rng);
        &self.order
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Trains `model` in place on the dataset's train split and reports
/// per-epoch metrics. The test split, when nonempty, is scored with
/// [`evaluate`] after every epoch.
///
/// A batch size larger than the training split is reduced to the split size.
/// On error the model may be partially updated; callers that need the
/// original should train a clone.
pub fn train(
    model: &mut VaeModel,
    dataset: &DigitDataset,
    cfg: &TrainConfig,
    sink: &mut dyn ProgressSink,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let train_split = &dataset.split().train;
    if train_split.is_empty() {
        return Err(TrainError::Config("training split is empty".into()));
    }
    let test: Vec<usize> = dataset.split().test.clone();
    let test_batch = (!test.is_empty()).then(|| dataset.batch(&test));

    model.freeze_up_to(cfg.freeze_up_to);
    model.zero_grads();

    let batch_size = cfg.batch_size.min(train_split.len());
    let mut epochs = EpochOrder::new(train_split, cfg.seed);
    let mut noise_rng = stream(cfg.seed, STREAM_NOISE);
    let mut adam = Adam::new(model, cfg.learning_rate);

    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        wall_time_ms: Vec::with_capacity(cfg.epochs),
        model_id: String::new(),
    };

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let order = epochs.next_epoch();
        let (mut sum_total, mut sum_bce, mut sum_kl) = (0.0, 0.0, 0.0);

        for chunk in order.chunks(batch_size) {
            if sink.should_cancel() {
                return Err(TrainError::Cancelled { epoch });
            }
            let x = dataset.batch(chunk);
            let eps = sample_noise(&mut noise_rng, chunk.len(), model.latent_dim());
            let pass = model.forward(&x, &eps)?;
            let parts = pass.loss();
            if !parts.total.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            model.backward(&pass)?;
            adam.step(model);

            let n = chunk.len() as f64;
            sum_total += parts.total * n;
            sum_bce += parts.bce * n;
            sum_kl += parts.kl * n;
        }

        let n = order.len() as f64;
        let test_total = match &test_batch {
            Some(x) => Some(evaluate_batch(model, x, DEFAULT_EVAL_SEED)?),
            None => None,
        };
        let event = ProgressEvent {
            epoch,
            train_total: sum_total / n,
            train_bce: sum_bce / n,
            train_kl: sum_kl / n,
            test_total,
        };
        if !event.train_total.is_finite() || test_total.is_some_and(|t| !t.is_finite()) {
            return Err(TrainError::Diverged { epoch });
        }
        log::debug!("epoch {epoch}: {event:?}");
        sink.on_epoch(&event);
        report.epochs.push(event);
        report.wall_time_ms.push(started.elapsed().as_millis() as u64);
    }

    report.model_id = model.fingerprint();
    Ok(report)
}

/// Mean total loss over `split` (indices into the dataset) with noise drawn
/// from [`DEFAULT_EVAL_SEED`]. Never mutates the model.
pub fn evaluate(model: &VaeModel, dataset: &DigitDataset, split: &[usize]) -> Result<f64, TrainError> {
    if split.is_empty() {
        return Err(TrainError::Config("evaluation split is empty".into()));
    }
    evaluate_batch(model, &dataset.batch(split), DEFAULT_EVAL_SEED)
}

/// Mean total loss over the rows of `x` (`[n, 784]`) with noise from `seed`.
pub fn evaluate_batch(model: &VaeModel, x: &Tensor, seed: u64) -> Result<f64, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = x.rows();
    let mut sum = 0.0;
    let indices: Vec<usize> = (0..rows).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let xb = x.gather_rows(chunk);
        let code = model.encode(&xb)?;
        let z = vae::reparameterize(&code.mu, &code.logvar, &mut rng)?;
        let x_hat = model.decode(&z)?;
        let parts = vae::loss(&xb, &x_hat, &code.mu, &code.logvar)?;
        sum += parts.total * chunk.len() as f64;
    }
    Ok(sum / rows as f64)
}
