use std::cell::Cell;

use shadowvae_core::dataset::{DigitDataset, Provenance, Split};
use shadowvae_core::trainer::{
    evaluate, evaluate_batch, train, EpochOrder, ProgressEvent, ProgressSink, TrainConfig, TrainError,
    DEFAULT_EVAL_SEED,
};
use shadowvae_core::vae::{loss, reparameterize, LayerId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(n: usize) -> DigitDataset {
    let (images, labels) = shadowvae_oracles::fixture_images();
    let pixels: Vec<u8> = images[..n]
        .iter()
        .flatten()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    DigitDataset::from_pixels(pixels, Some(labels[..n].to_vec()), Provenance::Mnist).unwrap()
}

fn small_config() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        batch_size: 8,
        hidden_dim: 32,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_leave_model_untouched() {
    let ds = fixture(20);
    let cfg = TrainConfig {
        epochs: 0,
        ..small_config()
    };
    let mut model = cfg.init_model().unwrap();
    let before = model.clone();
    let report = train(&mut model, &ds, &cfg, &mut ()).unwrap();
    assert!(report.epochs.is_empty());
    assert_eq!(model.to_checkpoint(), before.to_checkpoint());
}

#[test]
fn memorizes_a_single_digit() {
    let (images, labels) = shadowvae_oracles::fixture_images();
    let one = labels.iter().position(|&l| l == 1).unwrap();
    let bytes: Vec<u8> = images[one].iter().map(|&v| (v * 255.0).round() as u8).collect();
    let pixels: Vec<u8> = bytes.iter().copied().cycle().take(20 * 784).collect();
    let ds = DigitDataset::from_pixels(pixels, None, Provenance::Mnist).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 4,
        latent_dim: 2,
        ..TrainConfig::default()
    };
    let mut model = cfg.init_model().unwrap();
    let report = train(&mut model, &ds, &cfg, &mut ()).unwrap();
    let first = report.epochs[0].train_bce;
    let last = report.epochs.last().unwrap().train_bce;
    assert!(last < 0.1 * first, "bce {first} -> {last}");
}

#[test]
fn same_seed_same_run() {
    let ds = fixture(40);
    let cfg = small_config();
    let run = || {
        let mut model = cfg.init_model().unwrap();
        let report = train(&mut model, &ds, &cfg, &mut ()).unwrap();
        (report, model.to_checkpoint())
    };
    let (r1, c1) = run();
    let (r2, c2) = run();
    assert!(r1.same_outcome(&r2));
    assert_eq!(c1, c2);
    assert_eq!(r1.epochs.len(), 3);
    assert_eq!(r1.wall_time_ms.len(), 3);

    let other = TrainConfig { seed: 43, ..cfg.clone() };
    let mut model = other.init_model().unwrap();
    let r3 = train(&mut model, &ds, &other, &mut ()).unwrap();
    assert!(!r1.same_outcome(&r3));
}

#[test]
fn progress_sink_sees_every_epoch_in_order() {
    let ds = fixture(40);
    let cfg = small_config();
    let mut events: Vec<ProgressEvent> = Vec::new();
    let mut model = cfg.init_model().unwrap();
    let report = train(&mut model, &ds, &cfg, &mut events).unwrap();
    assert_eq!(events, report.epochs);
    assert_eq!(events.iter().map(|e| e.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
    for e in &events {
        assert!((e.train_total - (e.train_bce + e.train_kl)).abs() < 1e-9);
        assert!(e.test_total.is_some());
    }
    let line = serde_json::to_string(&events[0]).unwrap();
    for key in ["epoch", "train_total", "train_bce", "train_kl", "test_total"] {
        assert!(line.contains(key));
    }
}

#[test]
fn frozen_encoder_is_bit_identical() {
    let ds = fixture(40);
    let cfg = TrainConfig {
        freeze_up_to: Some(LayerId::EncLogvar.index()),
        ..small_config()
    };
    let mut model = cfg.init_model().unwrap();
    let before = model.clone();
    train(&mut model, &ds, &cfg, &mut ()).unwrap();
    for id in LayerId::ALL {
        let same = model.layer(id).weights() == before.layer(id).weights()
            && model.layer(id).bias() == before.layer(id).bias();
        assert_eq!(same, id.is_encoder(), "{}", id.name());
    }
}

#[test]
fn evaluate_is_pure_and_repeatable() {
    let ds = fixture(40);
    let cfg = small_config();
    let model = cfg.init_model().unwrap();
    let before = model.clone();
    let a = evaluate(&model, &ds, &ds.split().test).unwrap();
    let b = evaluate(&model, &ds, &ds.split().test).unwrap();
    assert_eq!(a, b);
    assert_eq!(model, before);
    assert!(matches!(evaluate(&model, &ds, &[]), Err(TrainError::Config(_))));
}

#[test]
fn evaluate_single_image_equals_loss() {
    let ds = fixture(10);
    let model = small_config().init_model().unwrap();
    let x = ds.batch(&[3]);
    let code = model.encode(&x).unwrap();
    let z = reparameterize(&code.mu, &code.logvar, &mut ChaCha8Rng::seed_from_u64(DEFAULT_EVAL_SEED)).unwrap();
    let expected = loss(&x, &model.decode(&z).unwrap(), &code.mu, &code.logvar).unwrap().total;
    assert_eq!(evaluate(&model, &ds, &[3]).unwrap(), expected);
    assert_eq!(evaluate_batch(&model, &x, DEFAULT_EVAL_SEED).unwrap(), expected);
}

#[test]
fn training_lowers_test_loss() {
    let ds = fixture(100);
    let cfg = TrainConfig {
        epochs: 10,
        hidden_dim: 64,
        ..TrainConfig::default()
    };
    let mut model = cfg.init_model().unwrap();
    let untrained = evaluate(&model, &ds, &ds.split().test).unwrap();
    train(&mut model, &ds, &cfg, &mut ()).unwrap();
    let trained = evaluate(&model, &ds, &ds.split().test).unwrap();
    assert!(trained < untrained, "{untrained} -> {trained}");
}

#[test]
fn shuffle_visits_each_item_once_per_epoch() {
    let train_idx: Vec<usize> = (0..50).map(|i| i * 3 + 1).collect();
    let mut order = EpochOrder::new(&train_idx, 7);
    let mut previous = Vec::new();
    for _ in 0..10 {
        let mut epoch = order.next_epoch().to_vec();
        assert_ne!(epoch, previous);
        previous = epoch.clone();
        epoch.sort_unstable();
        assert_eq!(epoch, train_idx);
    }
}

#[test]
fn batch_larger_than_split_is_clamped() {
    let ds = fixture(10);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 1000,
        hidden_dim: 8,
        ..TrainConfig::default()
    };
    let mut model = cfg.init_model().unwrap();
    assert!(train(&mut model, &ds, &cfg, &mut ()).is_ok());
}

#[test]
fn rejects_bad_configs_and_empty_training_split() {
    let ds = fixture(10);
    let mut model = small_config().init_model().unwrap();
    for cfg in [
        TrainConfig { batch_size: 0, ..small_config() },
        TrainConfig { learning_rate: -1.0, ..small_config() },
        TrainConfig { freeze_up_to: Some(5), ..small_config() },
    ] {
        assert!(matches!(train(&mut model, &ds, &cfg, &mut ()), Err(TrainError::Config(_))));
    }
    let n = ds.len();
    let all_test = ds.with_split(Split { train: vec![], test: (0..n).collect() }).unwrap();
    assert!(matches!(train(&mut model, &all_test, &small_config(), &mut ()), Err(TrainError::Config(_))));
    assert!(serde_json::from_str::<TrainConfig>(r#"{"epochs": 2, "bogus": 1}"#).is_err());
    let partial: TrainConfig = serde_json::from_str(r#"{"epochs": 2}"#).unwrap();
    assert_eq!(partial.batch_size, 32);
}

#[test]
fn huge_learning_rate_reports_divergence() {
    let ds = fixture(40);
    let cfg = TrainConfig {
        learning_rate: 1e300,
        epochs: 20,
        ..small_config()
    };
    let mut model = cfg.init_model().unwrap();
    match train(&mut model, &ds, &cfg, &mut ()) {
        Err(TrainError::Diverged { epoch }) => assert!(epoch >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

struct CancelAfter {
    seen: usize,
    limit: usize,
    polls: Cell<usize>,
}

impl ProgressSink for CancelAfter {
    fn on_epoch(&mut self, _: &ProgressEvent) {
        self.seen += 1;
    }

    fn should_cancel(&self) -> bool {
        self.polls.set(self.polls.get() + 1);
        self.seen >= self.limit
    }
}

#[test]
fn cancellation_is_checked_between_batches() {
    let ds = fixture(40);
    let cfg = TrainConfig { epochs: 10, ..small_config() };
    let mut model = cfg.init_model().unwrap();
    let mut sink = CancelAfter { seen: 0, limit: 2, polls: Cell::new(0) };
    match train(&mut model, &ds, &cfg, &mut sink) {
        Err(TrainError::Cancelled { epoch }) => assert_eq!(epoch, 3),
        other => panic!("expected cancellation, got {other:?}"),
    }
    // 32 training images in batches of 8: four polls per epoch.
    assert_eq!(sink.polls.get(), 2 * 4 + 1);
}
