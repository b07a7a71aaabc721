use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowvae_core::numerics::{ParamKind, Tensor};
use shadowvae_core::vae::{
    kl_divergence, loss, reparameterize, sample_noise, LayerId, VaeModel,
};
use shadowvae_oracles::grad::{max_gradient_error, random_case, NaiveVae};
use shadowvae_oracles::kl::monte_carlo_kl;

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..784).map(|_| rng.random_range(0..=255u8) as f64 / 255.0).collect())
        .collect();
    Tensor::from_rows(&rows).unwrap()
}

#[test]
fn zero_network_outputs() {
    let model = VaeModel::zeros(16, 2).unwrap();
    let x = random_batch(&mut ChaCha8Rng::seed_from_u64(1), 3);
    let code = model.encode(&x).unwrap();
    assert!(code.mu.data().iter().all(|&v| v == 0.0));
    assert!(code.logvar.data().iter().all(|&v| v == 0.0));
    let out = model.decode(&Tensor::filled(&[3, 2], 7.5)).unwrap();
    assert_eq!(out.shape(), &[3, 784]);
    assert!(out.data().iter().all(|&v| v == 0.5));
}

#[test]
fn encode_and_decode_are_deterministic() {
    let make = || VaeModel::new(32, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let (a, b) = (make(), make());
    let x = random_batch(&mut ChaCha8Rng::seed_from_u64(2), 4);
    assert_eq!(a.encode(&x).unwrap(), b.encode(&x).unwrap());
    let z = Tensor::filled(&[4, 2], 0.3);
    assert_eq!(a.decode(&z).unwrap(), b.decode(&z).unwrap());
}

#[test]
fn forward_matches_naive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..5 {
        let model = VaeModel::new(24 + trial, 3, &mut rng).unwrap();
        let naive = NaiveVae::from_model(&model);
        let x = random_batch(&mut rng, 3);
        let eps = sample_noise(&mut rng, 3, 3);
        let code = model.encode(&x).unwrap();
        let pass = model.forward(&x, &eps).unwrap();
        let mut bce = 0.0;
        let mut kl = 0.0;
        for r in 0..3 {
            let (mu, lv) = naive.encode(x.row(r));
            for k in 0..3 {
                assert!((mu[k] - code.mu.row(r)[k]).abs() < 1e-12);
                assert!((lv[k] - code.logvar.row(r)[k]).abs() < 1e-12);
            }
            let recon = naive.decode(code.mu.row(r));
            let lib = model.decode(&Tensor::from_rows(&[code.mu.row(r)]).unwrap()).unwrap();
            for (a, b) in recon.iter().zip(lib.data()) {
                assert!((a - b).abs() < 1e-12);
            }
            let item = naive.item(x.row(r), eps.row(r));
            for (a, b) in item.x_hat().iter().zip(pass.x_hat().row(r)) {
                assert!((a - b).abs() < 1e-12);
            }
            bce += item.bce / 3.0;
            kl += item.kl / 3.0;
        }
        let parts = pass.loss();
        assert!((parts.bce - bce).abs() < 1e-9 * bce.abs().max(1.0));
        assert!((parts.kl - kl).abs() < 1e-9 * kl.abs().max(1.0));
        assert_eq!(parts.total, parts.bce + parts.kl);
    }
}

#[test]
fn rejects_wrong_widths() {
    let model = VaeModel::zeros(8, 2).unwrap();
    assert!(model.encode(&Tensor::zeros(&[1, 783])).is_err());
    assert!(model.decode(&Tensor::zeros(&[1, 3])).is_err());
}

#[test]
fn decode_output_strictly_inside_unit_interval() {
    let mut model = VaeModel::zeros(4, 2).unwrap();
    for b in model.layer_mut(LayerId::DecOut).param_mut(ParamKind::Bias).data_mut().iter_mut().enumerate() {
        *b.1 = if b.0 % 2 == 0 { 1e6 } else { -1e6 };
    }
    let out = model.decode(&Tensor::zeros(&[1, 2])).unwrap();
    assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn reparameterize_vanishing_variance() {
    let mu = Tensor::new(vec![2, 2], vec![0.5, -1.0, 2.0, 3.0]).unwrap();
    let logvar = Tensor::filled(&[2, 2], -60.0);
    let z = reparameterize(&mu, &logvar, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    for (a, b) in z.data().iter().zip(mu.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn reparameterize_is_seeded() {
    let mu = Tensor::zeros(&[3, 2]);
    let logvar = Tensor::filled(&[3, 2], 0.4);
    let a = reparameterize(&mu, &logvar, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let b = reparameterize(&mu, &logvar, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reparameterize_standard_normal_moments() {
    let n = 100_000;
    let mu = Tensor::zeros(&[n, 2]);
    let logvar = Tensor::zeros(&[n, 2]);
    let z = reparameterize(&mu, &logvar, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
    for d in 0..2 {
        let col: Vec<f64> = (0..n).map(|r| z.row(r)[d]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((0.96..=1.04).contains(&var), "variance {var}");
    }
}

#[test]
fn kl_known_values() {
    let zero = Tensor::zeros(&[1, 2]);
    assert_eq!(kl_divergence(&zero, &zero).unwrap(), 0.0);
    let mu = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
    let lv = Tensor::zeros(&[1, 1]);
    assert!((kl_divergence(&mu, &lv).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn kl_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let mu: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lv: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..1.5)).collect();
        let closed = kl_divergence(
            &Tensor::new(vec![1, 2], mu.clone()).unwrap(),
            &Tensor::new(vec![1, 2], lv.clone()).unwrap(),
        )
        .unwrap();
        let mc = monte_carlo_kl(&mu, &lv, 100_000, &mut rng);
        assert!((closed - mc).abs() / closed < 0.02, "closed {closed} mc {mc}");
    }
}

#[test]
fn loss_is_mean_over_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let x = random_batch(&mut rng, 2);
    let x_hat = Tensor::filled(&[2, 784], 0.25);
    let mu = Tensor::new(vec![2, 1], vec![1.0, 0.0]).unwrap();
    let lv = Tensor::zeros(&[2, 1]);
    let both = loss(&x, &x_hat, &mu, &lv).unwrap();
    assert!((both.kl - 0.25).abs() < 1e-15);
    let single = |r: usize| {
        loss(
            &Tensor::from_rows(&[x.row(r)]).unwrap(),
            &Tensor::filled(&[1, 784], 0.25),
            &Tensor::from_rows(&[mu.row(r)]).unwrap(),
            &Tensor::zeros(&[1, 1]),
        )
        .unwrap()
    };
    let mean = (single(0).bce + single(1).bce) / 2.0;
    assert!((both.bce - mean).abs() < 1e-10);
}

#[test]
fn gradients_match_finite_differences_on_digits() {
    let (images, _) = shadowvae_oracles::fixture_images();
    for seed in 0..5 {
        let mut case = random_case(seed, 8, 2, 4, &images, 1e-3);
        let report = max_gradient_error(&mut case.model, &case.x, &case.eps, 1e-5, 1e-3);
        assert_eq!(report.checked, case.model.parameter_count());
        assert!(report.max_error < 1e-4, "seed {seed}: {report:?}");
    }
}

#[test]
fn gradients_match_on_dense_inputs_and_skip_frozen_layers() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let dense: Vec<Vec<f64>> = (0..8).map(|_| (0..784).map(|_| rng.random::<f64>()).collect()).collect();
    let mut case = random_case(99, 6, 3, 2, &dense, 1e-3);
    let full = max_gradient_error(&mut case.model, &case.x, &case.eps, 1e-5, 1e-3);
    assert!(full.max_error < 1e-4, "{full:?}");
    case.model.freeze_up_to(Some(LayerId::EncLogvar.index()));
    let partial = max_gradient_error(&mut case.model, &case.x, &case.eps, 1e-5, 1e-3);
    let decoder: usize = [LayerId::DecHidden, LayerId::DecOut]
        .iter()
        .map(|&id| case.model.layer(id).weights().len() + case.model.layer(id).bias().len())
        .sum();
    assert_eq!(partial.checked, decoder);
    assert!(partial.max_error < 1e-4);
}

#[test]
fn gradient_is_zero_past_the_logvar_clamp() {
    let mut model = VaeModel::zeros(4, 1).unwrap();
    model.layer_mut(LayerId::EncLogvar).param_mut(ParamKind::Bias).data_mut()[0] = 25.0;
    let x = Tensor::filled(&[1, 784], 0.5);
    let pass = model.forward(&x, &Tensor::filled(&[1, 1], 0.3)).unwrap();
    assert_eq!(pass.logvar().data()[0], 10.0);
    model.backward(&pass).unwrap();
    assert_eq!(model.layer(LayerId::EncLogvar).grad(ParamKind::Bias).data()[0], 0.0);
}

proptest! {
    #[test]
    fn kl_is_nonnegative(
        mu in prop::collection::vec(-5.0f64..5.0, 1..6),
        lv_seed in prop::collection::vec(-8.0f64..8.0, 6),
    ) {
        let n = mu.len();
        let lv: Vec<f64> = lv_seed[..n].to_vec();
        let kl = kl_divergence(&Tensor::new(vec![1, n], mu.clone()).unwrap(), &Tensor::new(vec![1, n], lv.clone()).unwrap()).unwrap();
        prop_assert!(kl >= 0.0);
        let at_origin = mu.iter().all(|&m| m == 0.0) && lv.iter().all(|&v| v == 0.0);
        if !at_origin {
            prop_assert!(kl > 0.0);
        }
    }

    #[test]
    fn kl_zero_only_at_standard_normal(n in 1usize..6) {
        let z = Tensor::zeros(&[2, n]);
        prop_assert!(kl_divergence(&z, &z).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pipeline_preserves_batch_size(batch in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = VaeModel::new(8, 2, &mut rng).unwrap();
        let x = random_batch(&mut rng, batch);
        let code = model.encode(&x).unwrap();
        let z = reparameterize(&code.mu, &code.logvar, &mut rng).unwrap();
        let out = model.decode(&z).unwrap();
        prop_assert_eq!(out.shape(), &[batch, 784]);
    }
}
