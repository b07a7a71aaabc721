//! Naive VAE forward pass and central finite differences of its loss.

use shadowvae_core::numerics::{ParamKind, Tensor};
use shadowvae_core::vae::{LayerId, VaeModel};

const LOGVAR_CLAMP: f64 = 10.0;
const LOGIT_CLAMP: f64 = 30.0;

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// `−[x ln σ(l) + (1−x) ln(1−σ(l))]` written as `softplus(l) − x·l`.
fn pixel_bce(target: f64, logit: f64) -> f64 {
    let l = logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    l.max(0.0) + (-l.abs()).exp().ln_1p() - target * l
}

#[derive(Clone, Debug)]
pub struct DenseLayer {
    /// `w[out][in]`
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl DenseLayer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.b)
            .map(|(row, b)| {
                let mut acc = *b;
                for (wi, xi) in row.iter().zip(x) {
                    acc += wi * xi;
                }
                acc
            })
            .collect()
    }
}

/// The five layers of a VAE, copied out of a model.
#[derive(Clone, Debug)]
pub struct NaiveVae {
    pub layers: Vec<DenseLayer>,
}

/// Loss terms for one batch (means over the batch).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NaiveLoss {
    pub total: f64,
    pub bce: f64,
    pub kl: f64,
}

/// Intermediate values of one item.
#[derive(Clone, Debug)]
pub struct ItemTrace {
    pub enc_pre: Vec<f64>,
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
    pub dec_pre: Vec<f64>,
    pub dec_h: Vec<f64>,
    pub logits: Vec<f64>,
    pub bce: f64,
    pub kl: f64,
}

impl ItemTrace {
    pub fn x_hat(&self) -> Vec<f64> {
        self.logits
            .iter()
            .map(|l| 1.0 / (1.0 + (-l.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)).exp()))
            .collect()
    }
}

impl NaiveVae {
    pub fn from_model(model: &VaeModel) -> Self {
        let layers = LayerId::ALL
            .iter()
            .map(|&id| {
                let l = model.layer(id);
                let inp = l.in_dim();
                let w = l.param(ParamKind::Weights).data();
                DenseLayer {
                    w: w.chunks(inp).map(<[f64]>::to_vec).collect(),
                    b: l.param(ParamKind::Bias).data().to_vec(),
                }
            })
            .collect();
        Self { layers }
    }

    /// Returns `(mu, logvar)` for one image.
    pub fn encode(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.head(&self.layers[0].apply(x))
    }

    fn head(&self, enc_pre: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = enc_pre.iter().copied().map(relu).collect();
        let mu = self.layers[1].apply(&h);
        let logvar = self.layers[2]
            .apply(&h)
            .into_iter()
            .map(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP))
            .collect();
        (mu, logvar)
    }

    pub fn decode(&self, z: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = self.layers[3].apply(z).into_iter().map(relu).collect();
        self.layers[4]
            .apply(&h)
            .into_iter()
            .map(|l| 1.0 / (1.0 + (-l.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)).exp()))
            .collect()
    }

    /// Everything downstream of the encoder hidden pre-activations.
    fn item_from_pre(&self, x: &[f64], eps: &[f64], enc_pre: Vec<f64>) -> ItemTrace {
        let (mu, logvar) = self.head(&enc_pre);
        let z: Vec<f64> = (0..mu.len()).map(|k| mu[k] + (0.5 * logvar[k]).exp() * eps[k]).collect();
        let dec_pre = self.layers[3].apply(&z);
        let dec_h: Vec<f64> = dec_pre.iter().copied().map(relu).collect();
        let logits = self.layers[4].apply(&dec_h);
        let bce = x.iter().zip(&logits).map(|(t, l)| pixel_bce(*t, *l)).sum();
        let kl = (0..mu.len())
            .map(|k| -0.5 * (1.0 + logvar[k] - mu[k] * mu[k] - logvar[k].exp()))
            .sum();
        ItemTrace {
            enc_pre,
            mu,
            logvar,
            dec_pre,
            dec_h,
            logits,
            bce,
            kl,
        }
    }

    pub fn item(&self, x: &[f64], eps: &[f64]) -> ItemTrace {
        self.item_from_pre(x, eps, self.layers[0].apply(x))
    }

    pub fn loss(&self, xs: &[Vec<f64>], eps: &[Vec<f64>]) -> NaiveLoss {
        let n = xs.len() as f64;
        let (mut bce, mut kl) = (0.0, 0.0);
        for (x, e) in xs.iter().zip(eps) {
            let t = self.item(x, e);
            bce += t.bce;
            kl += t.kl;
        }
        NaiveLoss {
            total: (bce + kl) / n,
            bce: bce / n,
            kl: kl / n,
        }
    }

    /// Smallest |pre-activation| over every ReLU in the pass. Finite
    /// differences straddle the kink when this is comparable to the step.
    pub fn min_relu_margin(&self, xs: &[Vec<f64>], eps: &[Vec<f64>]) -> f64 {
        xs.iter()
            .zip(eps)
            .flat_map(|(x, e)| {
                let t = self.item(x, e);
                t.enc_pre.into_iter().chain(t.dec_pre)
            })
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    /// Central differences `(L(θ+h) − L(θ−h)) / 2h` of the batch-mean total
    /// loss for every parameter, laid out like the model:
    /// `[layer][weights, bias]`, weights row-major `[out][in]`.
    ///
    /// Items whose loss cannot depend on a parameter (a zero input pixel for
    /// a first-layer weight, a different pixel for an output-layer weight)
    /// contribute an exact zero difference and are skipped.
    pub fn finite_differences(&self, xs: &[Vec<f64>], eps: &[Vec<f64>], h: f64) -> Vec<[Vec<f64>; 2]> {
        let n = xs.len() as f64;
        let base: Vec<ItemTrace> = xs.iter().zip(eps).map(|(x, e)| self.item(x, e)).collect();
        let item_total = |t: &ItemTrace| t.bce + t.kl;
        let mut out = Vec::new();

        // First layer: w[o][i] moves only pre-activation o, by h·x[i].
        {
            let l = &self.layers[0];
            let (outs, ins) = (l.w.len(), l.w[0].len());
            let mut grads = [vec![0.0; outs * ins], vec![0.0; outs]];
            for o in 0..outs {
                for i in 0..=ins {
                    let mut diff = 0.0;
                    for (b, t) in base.iter().enumerate() {
                        let dx = if i == ins { 1.0 } else { xs[b][i] };
                        if dx == 0.0 {
                            continue;
                        }
                        let shifted = |sign: f64| {
                            let mut pre = t.enc_pre.clone();
                            pre[o] += sign * h * dx;
                            item_total(&self.item_from_pre(&xs[b], &eps[b], pre))
                        };
                        diff += shifted(1.0) - shifted(-1.0);
                    }
                    let g = diff / n / (2.0 * h);
                    if i == ins {
                        grads[1][o] = g;
                    } else {
                        grads[0][o * ins + i] = g;
                    }
                }
            }
            out.push(grads);
        }

        // Small middle layers: perturb the copy and rerun from the cached
        // first-layer output.
        for li in 1..=3 {
            let l = &self.layers[li];
            let (outs, ins) = (l.w.len(), l.w[0].len());
            let mut grads = [vec![0.0; outs * ins], vec![0.0; outs]];
            let mut m = self.clone();
            for o in 0..outs {
                for i in 0..=ins {
                    let mut eval = |sign: f64| {
                        let slot = if i == ins { &mut m.layers[li].b[o] } else { &mut m.layers[li].w[o][i] };
                        let saved = *slot;
                        *slot = saved + sign * h;
                        let v: f64 = base
                            .iter()
                            .enumerate()
                            .map(|(b, t)| item_total(&m.item_from_pre(&xs[b], &eps[b], t.enc_pre.clone())))
                            .sum();
                        let slot = if i == ins { &mut m.layers[li].b[o] } else { &mut m.layers[li].w[o][i] };
                        *slot = saved;
                        v
                    };
                    let g = (eval(1.0) - eval(-1.0)) / n / (2.0 * h);
                    if i == ins {
                        grads[1][o] = g;
                    } else {
                        grads[0][o * ins + i] = g;
                    }
                }
            }
            out.push(grads);
        }

        // Output layer: w[p][j] moves only logit p.
        {
            let l = &self.layers[4];
            let (outs, ins) = (l.w.len(), l.w[0].len());
            let mut grads = [vec![0.0; outs * ins], vec![0.0; outs]];
            for p in 0..outs {
                for j in 0..=ins {
                    let mut diff = 0.0;
                    for (b, t) in base.iter().enumerate() {
                        let dl = if j == ins { 1.0 } else { t.dec_h[j] };
                        let logit = t.logits[p];
                        diff += pixel_bce(xs[b][p], logit + h * dl) - pixel_bce(xs[b][p], logit - h * dl);
                    }
                    let g = diff / n / (2.0 * h);
                    if j == ins {
                        grads[1][p] = g;
                    } else {
                        grads[0][p * ins + j] = g;
                    }
                }
            }
            out.push(grads);
        }
        out
    }
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Worst relative error between the model's backpropagated gradients and
/// central differences of the naive re-implementation, over every unfrozen
/// parameter. Leaves the model's gradient buffers zeroed.
pub fn max_gradient_error(model: &mut VaeModel, x: &Tensor, eps: &Tensor, step: f64, floor: f64) -> GradientReport {
    let naive = NaiveVae::from_model(model);
    let xs: Vec<Vec<f64>> = (0..x.rows()).map(|r| x.row(r).to_vec()).collect();
    let es: Vec<Vec<f64>> = (0..eps.rows()).map(|r| eps.row(r).to_vec()).collect();
    let numeric = naive.finite_differences(&xs, &es, step);

    model.zero_grads();
    let pass = model.forward(x, eps).expect("forward");
    model.backward(&pass).expect("backward");

    let mut report = GradientReport::default();
    for (li, id) in LayerId::ALL.iter().enumerate() {
        let layer = model.layer(*id);
        if layer.is_frozen() {
            continue;
        }
        for (k, kind) in [ParamKind::Weights, ParamKind::Bias].into_iter().enumerate() {
            for (a, n) in layer.grad(kind).data().iter().zip(&numeric[li][k]) {
                let e = relative_error(*a, *n, floor);
                report.checked += 1;
                if e > report.max_error {
                    report.max_error = e;
                    report.worst = Some((id.name(), *a, *n));
                }
            }
        }
    }
    model.zero_grads();
    report
}

#[derive(Debug, Default, Clone)]
pub struct GradientReport {
    pub checked: usize,
    pub max_error: f64,
    /// Layer name, analytic and numeric value at the worst parameter.
    pub worst: Option<(&'static str, f64, f64)>,
}

/// One gradient-check case: a small random model, a batch and its noise.
pub struct GradientCase {
    pub model: VaeModel,
    pub x: Tensor,
    pub eps: Tensor,
    /// Number of draws rejected for having a ReLU input within
    /// `margin` of the kink.
    pub redraws: usize,
}

/// Draws a VAE with Glorot weights and small random biases, a batch of
/// `batch` rows picked from `images` and standard-normal noise, all from
/// `seed`. Draws with a ReLU pre-activation closer than `margin` to zero are
/// discarded and redrawn.
pub fn random_case(seed: u64, hidden: usize, latent: usize, batch: usize, images: &[Vec<f64>], margin: f64) -> GradientCase {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut redraws = 0;
    loop {
        let mut model = VaeModel::new(hidden, latent, &mut rng).expect("dims");
        for id in LayerId::ALL {
            for b in model.layer_mut(id).param_mut(ParamKind::Bias).data_mut() {
                *b = rng.random_range(-0.1..0.1);
            }
        }
        let rows: Vec<Vec<f64>> = (0..batch)
            .map(|_| images[rng.random_range(0..images.len())].clone())
            .collect();
        let noise: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..latent).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        if NaiveVae::from_model(&model).min_relu_margin(&rows, &noise) < margin {
            redraws += 1;
            continue;
        }
        return GradientCase {
            model,
            x: Tensor::from_rows(&rows).expect("rows"),
            eps: Tensor::from_rows(&noise).expect("rows"),
            redraws,
        };
    }
}
