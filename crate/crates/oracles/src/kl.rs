//! Monte-Carlo estimate of KL(N(mu, e^logvar) ‖ N(0, 1)).

use rand::Rng;
use rand_distr::StandardNormal;

/// Mean of `ln q(z) − ln p(z)` over `samples` draws z ~ q, summed over the
/// latent dimensions. The `ln 2π` terms cancel and are left out.
pub fn monte_carlo_kl<R: Rng>(mu: &[f64], logvar: &[f64], samples: usize, rng: &mut R) -> f64 {
    let mut total = 0.0;
    for _ in 0..samples {
        for (m, lv) in mu.iter().zip(logvar) {
            let sigma = (0.5 * lv).exp();
            let e: f64 = rng.sample(StandardNormal);
            let z = m + sigma * e;
            let ln_q = -0.5 * lv - 0.5 * e * e;
            let ln_p = -0.5 * z * z;
            total += ln_q - ln_p;
        }
    }
    total / samples as f64
}
