use serde::{Deserialize, Serialize};

use super::gif::DEFAULT_FRAME_DELAY_CS;
use super::{FrameSequence, GrayImage, MediaError};
use crate::numerics::Tensor;
use crate::vae::{ModelError, VaeModel};
use crate::{IMAGE_PIXELS, IMAGE_SIDE};

/// An interpolation endpoint: an image to encode, or a latent code as is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Image(Vec<f64>),
    Latent(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSpec {
    pub endpoint_a: Endpoint,
    pub endpoint_b: Endpoint,
    pub num_images: usize,
    #[serde(default = "default_true")]
    pub show_gif_only: bool,
    #[serde(default = "default_delay")]
    pub frame_delay_cs: u16,
}

fn default_true() -> bool {
    true
}

fn default_delay() -> u16 {
    DEFAULT_FRAME_DELAY_CS
}

/// Latent position of an endpoint. Images are encoded and only the
/// posterior mean is kept, so the result is deterministic.
pub fn latent_mean(model: &VaeModel, endpoint: &Endpoint) -> Result<Vec<f64>, MediaError> {
    match endpoint {
        Endpoint::Image(pixels) => {
            if pixels.len() != IMAGE_PIXELS {
                return Err(MediaError::Spec(format!(
                    "endpoint image has {} values, expected {IMAGE_PIXELS}",
                    pixels.len()
                )));
            }
            if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(MediaError::Spec(format!("endpoint pixel {v} outside [0, 1]")));
            }
            let x = Tensor::new(vec![1, IMAGE_PIXELS], pixels.clone()).expect("784 values");
            Ok(model.encode(&x)?.mu.into_data())
        }
        Endpoint::Latent(z) => {
            if z.len() != model.latent_dim() {
                return Err(MediaError::Model(ModelError::Dimension(
                    crate::numerics::NumericsError::Dimension {
                        op: "latent_endpoint",
                        expected: vec![model.latent_dim()],
                        got: vec![z.len()],
                    },
                )));
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(MediaError::Spec("latent endpoint is not finite".into()));
            }
            Ok(z.clone())
        }
    }
}

/// `(1 − t)·a + t·b`, exact at `t = 0` and `t = 1`.
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| (1.0 - t) * x + t * y).collect()
}

/// Decodes a single latent code to a quantized 28×28 frame.
pub fn decode_frame(model: &VaeModel, z: &[f64]) -> Result<GrayImage, MediaError> {
    Ok(decode_rows(model, &[z.to_vec()])?.remove(0))
}

fn decode_rows(model: &VaeModel, zs: &[Vec<f64>]) -> Result<Vec<GrayImage>, MediaError> {
    let z = Tensor::from_rows(zs).map_err(ModelError::from)?;
    let x_hat = model.decode(&z)?;
    (0..x_hat.rows())
        .map(|r| GrayImage::from_unit(IMAGE_SIDE, IMAGE_SIDE, x_hat.row(r)))
        .collect()
}

fn interpolation_steps(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| k as f64 / (n - 1) as f64)
}

/// Frames decoded at evenly spaced points on the segment between the two
/// endpoints' latent means, endpoints included.
pub fn interpolate(model: &VaeModel, spec: &InterpolationSpec) -> Result<FrameSequence, MediaError> {
    if spec.num_images < 2 {
        return Err(MediaError::Spec(format!("num_images must be at least 2, got {}", spec.num_images)));
    }
    if spec.frame_delay_cs == 0 {
        return Err(MediaError::Spec("frame_delay_cs must be positive".into()));
    }
    let za = latent_mean(model, &spec.endpoint_a)?;
    let zb = latent_mean(model, &spec.endpoint_b)?;
    let zs: Vec<Vec<f64>> = interpolation_steps(spec.num_images).map(|t| lerp(&za, &zb, t)).collect();
    FrameSequence::new(decode_rows(model, &zs)?)
}

/// Bilinear sweep over the four corner codes, `corners` ordered top-left,
/// top-right, bottom-left, bottom-right. Returns `grid_n` rows of `grid_n`
/// frames; row 0 runs top-left → top-right.
pub fn interpolate_2d(model: &VaeModel, corners: &[Endpoint; 4], grid_n: usize) -> Result<Vec<Vec<GrayImage>>, MediaError> {
    if grid_n < 2 {
        return Err(MediaError::Spec(format!("grid_n must be at least 2, got {grid_n}")));
    }
    let z: Vec<Vec<f64>> = corners.iter().map(|c| latent_mean(model, c)).collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(grid_n);
    for u in interpolation_steps(grid_n) {
        let zs: Vec<Vec<f64>> = interpolation_steps(grid_n)
            .map(|v| lerp(&lerp(&z[0], &z[1], v), &lerp(&z[2], &z[3], v), u))
            .collect();
        rows.push(decode_rows(model, &zs)?);
    }
    Ok(rows)
}

/// Lays a grid of equally sized frames out as one image.
pub fn tile_grid(grid: &[Vec<GrayImage>]) -> Result<GrayImage, MediaError> {
    let first = grid
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| MediaError::Image("empty grid".into()))?;
    let (fw, fh) = (first.width(), first.height());
    let cols = grid[0].len();
    if grid.iter().any(|r| r.len() != cols) || grid.iter().flatten().any(|f| (f.width(), f.height()) != (fw, fh)) {
        return Err(MediaError::Image("ragged grid".into()));
    }
    let (w, h) = (fw * cols, fh * grid.len());
    let mut pixels = vec![0u8; w * h];
    for (gr, row) in grid.iter().enumerate() {
        for (gc, frame) in row.iter().enumerate() {
            for y in 0..fh {
                let dst = (gr * fh + y) * w + gc * fw;
                pixels[dst..dst + fw].copy_from_slice(&frame.pixels()[y * fw..(y + 1) * fw]);
            }
        }
    }
    GrayImage::new(w, h, pixels)
}
