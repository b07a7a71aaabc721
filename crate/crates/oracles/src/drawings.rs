//! Synthetic hand-drawn digits on the 280×280 canvas, with a little seeded
//! wobble so no two drawings are identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Strokes = Vec<Vec<(f64, f64)>>;

fn jitter(rng: &mut ChaCha8Rng, amount: f64) -> f64 {
    rng.random_range(-amount..=amount)
}

/// An ellipse traced as one closed polyline.
pub fn zero(seed: u64) -> Strokes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (140.0 + jitter(&mut rng, 15.0), 140.0 + jitter(&mut rng, 15.0));
    let (rx, ry) = (55.0 + jitter(&mut rng, 10.0), 85.0 + jitter(&mut rng, 10.0));
    let line = (0..=40)
        .map(|k| {
            let a = k as f64 / 40.0 * std::f64::consts::TAU;
            (cx + rx * a.cos() + jitter(&mut rng, 2.0), cy + ry * a.sin() + jitter(&mut rng, 2.0))
        })
        .collect();
    vec![line]
}

/// A slightly slanted vertical bar, sometimes with a flag at the top.
pub fn one(seed: u64) -> Strokes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = 140.0 + jitter(&mut rng, 20.0);
    let slant = jitter(&mut rng, 25.0);
    let (top, bottom) = (50.0 + jitter(&mut rng, 10.0), 230.0 + jitter(&mut rng, 10.0));
    let mut strokes = vec![vec![(x + slant, top), (x, (top + bottom) / 2.0), (x - slant, bottom)]];
    if rng.random_bool(0.5) {
        strokes.push(vec![(x + slant - 35.0, top + 30.0), (x + slant, top)]);
    }
    strokes
}
