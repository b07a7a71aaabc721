//! Latent-space interpolation and the image formats it is exported in.

mod gif;
mod interp;
mod pgm;

pub use self::gif::{encode_gif, lzw_compress, DEFAULT_FRAME_DELAY_CS};
pub use interp::{
    decode_frame, interpolate, interpolate_2d, latent_mean, lerp, tile_grid, Endpoint, InterpolationSpec,
};
pub use pgm::{parse_pgm, write_pgm};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vae::ModelError;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("invalid interpolation request: {0}")]
    Spec(String),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("invalid image: {0}")]
    Image(String),
}

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, MediaError> {
        if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(MediaError::Image(format!("unsupported dimensions {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(MediaError::Image(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// Quantizes `[0, 1]` intensities with `round(255·v)`.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Result<Self, MediaError> {
        let pixels = values.iter().map(|&v| (255.0 * v).round().clamp(0.0, 255.0) as u8).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

/// Nonempty run of equally sized frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSequence {
    frames: Vec<GrayImage>,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayImage>) -> Result<Self, MediaError> {
        let first = frames.first().ok_or_else(|| MediaError::Image("empty frame sequence".into()))?;
        let dims = (first.width, first.height);
        if let Some(bad) = frames.iter().find(|f| (f.width, f.height) != dims) {
            return Err(MediaError::Image(format!(
                "frame is {}x{} but the sequence is {}x{}",
                bad.width, bad.height, dims.0, dims.1
            )));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[GrayImage] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }
}
