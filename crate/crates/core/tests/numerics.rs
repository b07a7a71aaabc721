use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shadowvae_core::numerics::{Activation, LinearLayer, ParamKind, Tensor};

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_layer(rng: &mut ChaCha8Rng, inp: usize, out: usize) -> LinearLayer {
    LinearLayer::from_params(random_tensor(rng, &[out, inp]), random_tensor(rng, &[out])).unwrap()
}

/// Triple-loop matmul plus bias.
fn naive_linear(w: &[f64], b: &[f64], x: &[f64], batch: usize, inp: usize, out: usize) -> Vec<f64> {
    let mut y = vec![0.0; batch * out];
    for r in 0..batch {
        for o in 0..out {
            let mut acc = b[o];
            for i in 0..inp {
                acc += w[o * inp + i] * x[r * inp + i];
            }
            y[r * out + o] = acc;
        }
    }
    y
}

fn naive_act(kind: Activation, v: f64) -> f64 {
    match kind {
        Activation::Relu => {
            if v > 0.0 {
                v
            } else {
                0.0
            }
        }
        Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
    }
}

/// Scalar loss `Σ c ⊙ act(L2(act(L1(x))))` computed naively from raw
/// parameter vectors.
struct Composite {
    dims: [usize; 3],
    batch: usize,
    act: [Activation; 2],
    x: Vec<f64>,
    c: Vec<f64>,
}

impl Composite {
    fn eval(&self, params: &[Vec<f64>; 4]) -> f64 {
        let [d0, d1, d2] = self.dims;
        let h: Vec<f64> = naive_linear(&params[0], &params[1], &self.x, self.batch, d0, d1)
            .into_iter()
            .map(|v| naive_act(self.act[0], v))
            .collect();
        let y = naive_linear(&params[2], &params[3], &h, self.batch, d1, d2);
        y.iter().zip(&self.c).map(|(v, c)| c * naive_act(self.act[1], *v)).sum()
    }
}

fn fd_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [rng.random_range(1..7), rng.random_range(1..7), rng.random_range(1..7)];
    let batch = rng.random_range(1..4);
    let pick = |r: &mut ChaCha8Rng| if r.random_bool(0.5) { Activation::Relu } else { Activation::Sigmoid };
    let act = [pick(&mut rng), pick(&mut rng)];
    let mut l1 = random_layer(&mut rng, dims[0], dims[1]);
    let mut l2 = random_layer(&mut rng, dims[1], dims[2]);
    let x = random_tensor(&mut rng, &[batch, dims[0]]);
    let c = random_tensor(&mut rng, &[batch, dims[2]]);

    let pre1 = l1.forward(&x).unwrap();
    let h = act[0].forward(&pre1);
    let pre2 = l2.forward(&h).unwrap();
    // Stay clear of the ReLU kink so the difference quotient is meaningful.
    if pre1.data().iter().chain(pre2.data()).any(|v| v.abs() < 1e-3) {
        return f64::NAN;
    }
    let g_h = l2.backward(&h, &act[1].backward(&pre2, &c).unwrap()).unwrap();
    l1.backward(&x, &act[0].backward(&pre1, &g_h).unwrap()).unwrap();

    let comp = Composite { dims, batch, act, x: x.data().to_vec(), c: c.data().to_vec() };
    let params = [
        l1.weights().data().to_vec(),
        l1.bias().data().to_vec(),
        l2.weights().data().to_vec(),
        l2.bias().data().to_vec(),
    ];
    let grads = [
        l1.grad(ParamKind::Weights),
        l1.grad(ParamKind::Bias),
        l2.grad(ParamKind::Weights),
        l2.grad(ParamKind::Bias),
    ];
    let h_step = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, g) in grads.iter().enumerate() {
        for i in 0..params[k].len() {
            let mut plus = params.clone();
            plus[k][i] += h_step;
            let mut minus = params.clone();
            minus[k][i] -= h_step;
            let numeric = (comp.eval(&plus) - comp.eval(&minus)) / (2.0 * h_step);
            let analytic = g.data()[i];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}

#[test]
fn composite_gradients_match_finite_differences() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 150 {
        let err = fd_case(seed);
        seed += 1;
        if err.is_nan() {
            continue;
        }
        assert!(err < 1e-6, "seed {}: relative error {err}", seed - 1);
        checked += 1;
    }
}

#[test]
fn forward_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layer = random_layer(&mut rng, 7, 5);
    let x = random_tensor(&mut rng, &[3, 7]);
    let y = layer.forward(&x).unwrap();
    let expected = naive_linear(layer.weights().data(), layer.bias().data(), x.data(), 3, 7, 5);
    for (a, b) in y.data().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn hand_checked_cases() {
    let l = LinearLayer::from_params(Tensor::from_rows(&[[1.0, 1.0]]).unwrap(), Tensor::new(vec![1], vec![1.0]).unwrap())
        .unwrap();
    assert_eq!(l.forward(&Tensor::from_rows(&[[2.0, 3.0]]).unwrap()).unwrap().data(), &[6.0]);

    let mut s = LinearLayer::from_params(Tensor::from_rows(&[[2.0]]).unwrap(), Tensor::zeros(&[1])).unwrap();
    let g_in = s
        .backward(&Tensor::from_rows(&[[3.0]]).unwrap(), &Tensor::from_rows(&[[1.0]]).unwrap())
        .unwrap();
    assert_eq!(g_in.data(), &[2.0]);
    assert_eq!(s.grad(ParamKind::Weights).data(), &[3.0]);
    assert_eq!(s.grad(ParamKind::Bias).data(), &[1.0]);

    let err = s.forward(&Tensor::zeros(&[1, 2])).unwrap_err().to_string();
    assert!(err.contains("[1, 2]"), "{err}");
}

#[test]
fn zero_upstream_gradient_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut l = random_layer(&mut rng, 4, 3);
    let x = random_tensor(&mut rng, &[2, 4]);
    let g = l.backward(&x, &Tensor::zeros(&[2, 3])).unwrap();
    assert!(g.data().iter().all(|&v| v == 0.0));
    assert!(l.grad(ParamKind::Weights).data().iter().all(|&v| v == 0.0));
    assert!(l.grad(ParamKind::Bias).data().iter().all(|&v| v == 0.0));
}

#[test]
fn gradients_accumulate_until_cleared() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut l = random_layer(&mut rng, 3, 2);
    let x = random_tensor(&mut rng, &[2, 3]);
    let g = random_tensor(&mut rng, &[2, 2]);
    l.backward(&x, &g).unwrap();
    let once = l.grad(ParamKind::Weights).clone();
    l.backward(&x, &g).unwrap();
    for (a, b) in l.grad(ParamKind::Weights).data().iter().zip(once.data()) {
        assert!((a - 2.0 * b).abs() < 1e-14);
    }
    l.zero_grads();
    assert!(l.grad(ParamKind::Weights).data().iter().all(|&v| v == 0.0));

    l.set_frozen(true);
    l.backward(&x, &g).unwrap();
    assert!(l.grad(ParamKind::Weights).data().iter().all(|&v| v == 0.0));
    let before = l.weights().clone();
    l.apply_update(|_, p, _| p.iter_mut().for_each(|v| *v += 1.0));
    assert_eq!(l.weights(), &before);
}

#[test]
fn activations() {
    assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
    assert_eq!(Activation::Relu.apply(-1.0), 0.0);
    assert_eq!(Activation::Relu.apply(2.0), 2.0);
    assert_eq!(Activation::Relu.apply(0.0), 0.0);
    assert!(Activation::Sigmoid.apply(-800.0) >= 0.0 && Activation::Sigmoid.apply(800.0) <= 1.0);
    let g = Activation::Relu
        .backward(&Tensor::new(vec![1, 3], vec![-1.0, 0.0, 2.0]).unwrap(), &Tensor::filled(&[1, 3], 5.0))
        .unwrap();
    assert_eq!(g.data(), &[0.0, 0.0, 5.0]);
}

proptest! {
    #[test]
    fn identity_weights_are_the_identity_map(n in 1usize..8, batch in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        let l = LinearLayer::from_params(Tensor::new(vec![n, n], w).unwrap(), Tensor::zeros(&[n])).unwrap();
        let x = random_tensor(&mut rng, &[batch, n]);
        prop_assert_eq!(l.forward(&x).unwrap(), x);
    }
}
