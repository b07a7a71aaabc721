use rand::Rng;

use super::{NumericsError, Result, Tensor};

/// Which parameter block of a [`LinearLayer`] an update or gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weights,
    Bias,
}

/// Fully connected layer `y = x·Wᵀ + b` with accumulated gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    weights: Tensor,
    bias: Tensor,
    grad_weights: Tensor,
    grad_bias: Tensor,
    frozen: bool,
}

impl LinearLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[out_dim, in_dim]),
            bias: Tensor::zeros(&[out_dim]),
            grad_weights: Tensor::zeros(&[out_dim, in_dim]),
            grad_bias: Tensor::zeros(&[out_dim]),
            frozen: false,
        }
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim);
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        for w in layer.weights.data_mut() {
            *w = rng.random_range(-limit..=limit);
        }
        layer
    }

    pub fn from_params(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(NumericsError::Dimension {
                op: "linear_from_params",
                expected: vec![bias.len(), 0],
                got: weights.shape().to_vec(),
            });
        }
        bias.expect_shape("linear_from_params", &[weights.rows()])?;
        let grad_weights = Tensor::zeros(weights.shape());
        let grad_bias = Tensor::zeros(bias.shape());
        Ok(Self {
            weights,
            bias,
            grad_weights,
            grad_bias,
            frozen: false,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn param(&self, kind: ParamKind) -> &Tensor {
        match kind {
            ParamKind::Weights => &self.weights,
            ParamKind::Bias => &self.bias,
        }
    }

    /// Direct parameter access; used by checkpoint loading and gradient checks.
    pub fn param_mut(&mut self, kind: ParamKind) -> &mut Tensor {
        match kind {
            ParamKind::Weights => &mut self.weights,
            ParamKind::Bias => &mut self.bias,
        }
    }

    pub fn grad(&self, kind: ParamKind) -> &Tensor {
        match kind {
            ParamKind::Weights => &self.grad_weights,
            ParamKind::Bias => &self.grad_bias,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    pub fn zero_grads(&mut self) {
        self.grad_weights.data_mut().fill(0.0);
        self.grad_bias.data_mut().fill(0.0);
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        if x.shape().len() != 2 || x.cols() != in_dim {
            return Err(NumericsError::Dimension {
                op: "linear_forward",
                expected: vec![x.shape()[0], in_dim],
                got: x.shape().to_vec(),
            });
        }
        let batch = x.rows();
        let w = self.weights.data();
        let b = self.bias.data();
        let mut out = Tensor::zeros(&[batch, out_dim]);
        for r in 0..batch {
            let xr = x.row(r);
            let orow = out.row_mut(r);
            for (o, slot) in orow.iter_mut().enumerate() {
                let wr = &w[o * in_dim..(o + 1) * in_dim];
                *slot = dot(wr, xr) + b[o];
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients (unless frozen) and returns the
    /// gradient with respect to the layer input.
    pub fn backward(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        if x.shape().len() != 2 || x.cols() != in_dim {
            return Err(NumericsError::Dimension {
                op: "linear_backward",
                expected: vec![x.shape()[0], in_dim],
                got: x.shape().to_vec(),
            });
        }
        grad_out.expect_shape("linear_backward", &[x.rows(), out_dim])?;
        self.accumulate(x, grad_out);

        let batch = x.rows();
        let w = self.weights.data();
        let mut grad_in = Tensor::zeros(&[batch, in_dim]);
        for r in 0..batch {
            let gi = grad_in.row_mut(r);
            for (o, &g) in grad_out.row(r).iter().enumerate() {
                if g != 0.0 {
                    axpy(g, &w[o * in_dim..(o + 1) * in_dim], gi);
                }
            }
        }
        Ok(grad_in)
    }

    /// Like [`backward`](Self::backward) but skips the input gradient, for
    /// the first layer of a network.
    pub fn backward_params(&mut self, x: &Tensor, grad_out: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.in_dim() {
            return Err(NumericsError::Dimension {
                op: "linear_backward",
                expected: vec![x.shape()[0], self.in_dim()],
                got: x.shape().to_vec(),
            });
        }
        grad_out.expect_shape("linear_backward", &[x.rows(), self.out_dim()])?;
        self.accumulate(x, grad_out);
        Ok(())
    }

    fn accumulate(&mut self, x: &Tensor, grad_out: &Tensor) {
        let in_dim = self.in_dim();
        let batch = x.rows();
        if !self.frozen {
            let gw = self.grad_weights.data_mut();
            let gb = self.grad_bias.data_mut();
            for r in 0..batch {
                let xr = x.row(r);
                for (o, &g) in grad_out.row(r).iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    axpy(g, xr, &mut gw[o * in_dim..(o + 1) * in_dim]);
                }
            }
        }
    }

    /// Hands each parameter block and its gradient to `step`, then clears the
    /// gradients. Frozen layers only have their gradients cleared.
    pub fn apply_update<F>(&mut self, mut step: F)
    where
        F: FnMut(ParamKind, &mut [f64], &[f64]),
    {
        if !self.frozen {
            step(ParamKind::Weights, self.weights.data_mut(), self.grad_weights.data());
            step(ParamKind::Bias, self.bias.data_mut(), self.grad_bias.data());
        }
        self.zero_grads();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(w: &[&[f64]], b: &[f64]) -> LinearLayer {
        LinearLayer::from_params(Tensor::from_rows(w).unwrap(), Tensor::new(vec![b.len()], b.to_vec()).unwrap())
            .unwrap()
    }

    #[test]
    fn identity_forward() {
        let l = layer(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0]);
        let x = Tensor::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(l.forward(&x).unwrap().data(), &[3.0, 4.0]);
    }

    #[test]
    fn hand_sum_forward() {
        let l = layer(&[&[1.0, 1.0]], &[1.0]);
        let x = Tensor::from_rows(&[[2.0, 3.0]]).unwrap();
        assert_eq!(l.forward(&x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let l = LinearLayer::zeros(3, 2);
        let err = l.forward(&Tensor::zeros(&[1, 4])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 3]") && msg.contains("[1, 4]"), "{msg}");
    }

    #[test]
    fn forward_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = LinearLayer::glorot(7, 5, &mut rng);
        let x = Tensor::new(vec![3, 7], (0..21).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y = l.forward(&x).unwrap();
        for b in 0..3 {
            for o in 0..5 {
                let mut acc = 0.0;
                for i in 0..7 {
                    acc += l.weights().data()[o * 7 + i] * x.data()[b * 7 + i];
                }
                acc += l.bias().data()[o];
                assert!((y.data()[b * 5 + o] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_chain_rule() {
        let mut l = layer(&[&[2.0]], &[0.0]);
        let x = Tensor::from_rows(&[[3.0]]).unwrap();
        let gi = l.backward(&x, &Tensor::from_rows(&[[1.0]]).unwrap()).unwrap();
        assert_eq!(gi.data(), &[2.0]);
        assert_eq!(l.grad(ParamKind::Weights).data(), &[3.0]);
        assert_eq!(l.grad(ParamKind::Bias).data(), &[1.0]);
    }

    #[test]
    fn zero_upstream_gradient_accumulates_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut l = LinearLayer::glorot(4, 3, &mut rng);
        let x = Tensor::filled(&[2, 4], 0.7);
        let gi = l.backward(&x, &Tensor::zeros(&[2, 3])).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(l.grad(ParamKind::Weights).data().iter().all(|&v| v == 0.0));
        assert!(l.grad(ParamKind::Bias).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_grad() {
        let mut l = LinearLayer::zeros(2, 2);
        assert!(l.backward(&Tensor::zeros(&[1, 2]), &Tensor::zeros(&[2, 2])).is_err());
    }

    #[test]
    fn frozen_layer_ignores_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut l = LinearLayer::glorot(3, 2, &mut rng);
        l.set_frozen(true);
        let before = l.clone();
        l.backward(&Tensor::filled(&[1, 3], 1.0), &Tensor::filled(&[1, 2], 1.0)).unwrap();
        l.apply_update(|_, p, g| p.iter_mut().zip(g).for_each(|(p, g)| *p -= g));
        assert_eq!(l.weights(), before.weights());
        assert_eq!(l.bias(), before.bias());
    }

    #[test]
    fn apply_update_zeroes_grads() {
        let mut l = LinearLayer::zeros(2, 1);
        l.backward(&Tensor::filled(&[1, 2], 1.0), &Tensor::filled(&[1, 1], 1.0)).unwrap();
        l.apply_update(|_, p, g| p.iter_mut().zip(g).for_each(|(p, g)| *p -= 0.5 * g));
        assert_eq!(l.weights().data(), &[-0.5, -0.5]);
        assert!(l.grad(ParamKind::Weights).data().iter().all(|&v| v == 0.0));
    }
}
