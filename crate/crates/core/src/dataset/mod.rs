//! Digit datasets: MNIST IDX ingest, rasterized drawings, train/test splits
//! and on-disk persistence.
//!
//! Pixels are stored as bytes (`value = byte / 255`), which is what both
//! sources produce, so persistence through IDX is lossless.

mod idx;
mod raster;
mod store;

pub use idx::{parse_idx, write_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use raster::{rasterize, StrokeSet, DEFAULT_CANVAS_SIZE, DEFAULT_PEN_WIDTH};
pub use store::{load_dataset, save_dataset, DatasetManifest, IMAGES_FILE, LABELS_FILE, MANIFEST_FILE};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numerics::Tensor;
use crate::IMAGE_PIXELS;

/// Fraction of each label group held out for testing.
pub const TEST_FRACTION: f64 = 0.2;
/// Seed used when a dataset is built without an explicit split seed.
pub const DEFAULT_SPLIT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} has {extra} trailing bytes")]
    TrailingBytes { what: &'static str, extra: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("images must be 28x28, found {rows}x{cols}")]
    ImageSize { rows: usize, cols: usize },
    #[error("drawing contains no ink")]
    EmptyDrawing,
    #[error("invalid strokes: {0}")]
    InvalidStrokes(String),
    #[error("pixel value {value} at image {image} is outside [0, 1]")]
    PixelRange { image: usize, value: f64 },
    #[error("invalid dataset: {0}")]
    Config(String),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DatasetError {
    /// Stable machine-readable code.
    pub fn reason(&self) -> &'static str {
        match self {
            DatasetError::BadMagic { .. } => "bad_magic",
            DatasetError::Truncated { .. } => "truncated",
            DatasetError::TrailingBytes { .. } => "trailing_bytes",
            DatasetError::CountMismatch { .. } => "count_mismatch",
            DatasetError::ImageSize { .. } => "image_size",
            DatasetError::EmptyDrawing => "empty_drawing",
            DatasetError::InvalidStrokes(_) => "invalid_strokes",
            DatasetError::PixelRange { .. } => "pixel_range",
            DatasetError::Config(_) => "invalid_config",
            DatasetError::Manifest(_) => "bad_manifest",
            DatasetError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Mnist,
    Drawn,
}

/// Disjoint train/test partition of dataset indices, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitDataset {
    pixels: Vec<u8>,
    labels: Option<Vec<u8>>,
    split: Split,
    provenance: Provenance,
}

impl DigitDataset {
    /// Dataset over raw 28×28 byte images (row-major, concatenated) with the
    /// default seeded split.
    pub fn from_pixels(pixels: Vec<u8>, labels: Option<Vec<u8>>, provenance: Provenance) -> Result<Self, DatasetError> {
        if !pixels.len().is_multiple_of(IMAGE_PIXELS) {
            return Err(DatasetError::Config(format!(
                "{} pixel bytes is not a whole number of 28x28 images",
                pixels.len()
            )));
        }
        let n = pixels.len() / IMAGE_PIXELS;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DatasetError::CountMismatch {
                    images: n,
                    labels: l.len(),
                });
            }
        }
        let mut ds = Self {
            pixels,
            labels,
            split: Split::default(),
            provenance,
        };
        ds.split = ds.seeded_split(DEFAULT_SPLIT_SEED);
        Ok(ds)
    }

    /// Quantizes `[0, 1]` images to bytes. Values are rounded to the nearest
    /// multiple of 1/255.
    pub fn from_unit_images(images: &[Tensor], labels: Option<Vec<u8>>, provenance: Provenance) -> Result<Self, DatasetError> {
        let mut pixels = Vec::with_capacity(images.len() * IMAGE_PIXELS);
        for (i, img) in images.iter().enumerate() {
            if img.len() != IMAGE_PIXELS {
                return Err(DatasetError::Config(format!(
                    "image {i} has {} values, expected {IMAGE_PIXELS}",
                    img.len()
                )));
            }
            for &v in img.data() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(DatasetError::PixelRange { image: i, value: v });
                }
                pixels.push(unit_to_byte(v));
            }
        }
        Self::from_pixels(pixels, labels, provenance)
    }

    pub fn len(&self) -> usize {
        self.pixels.len() / IMAGE_PIXELS
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn image_bytes(&self, index: usize) -> &[u8] {
        &self.pixels[index * IMAGE_PIXELS..(index + 1) * IMAGE_PIXELS]
    }

    /// Image `index` as a `[784]` tensor in `[0, 1]`.
    pub fn image(&self, index: usize) -> Tensor {
        Tensor::new(vec![IMAGE_PIXELS], self.image_bytes(index).iter().map(|&b| byte_to_unit(b)).collect())
            .expect("784 values")
    }

    /// Stacks the given images into a `[indices.len(), 784]` batch.
    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        for &i in indices {
            data.extend(self.image_bytes(i).iter().map(|&b| byte_to_unit(b)));
        }
        Tensor::new(vec![indices.len(), IMAGE_PIXELS], data).expect("nonempty batch")
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    /// Set when the test split came out empty because the dataset is too
    /// small to hold anything out.
    pub fn split_warning(&self) -> bool {
        self.split.test.is_empty()
    }

    /// Replaces the split after checking it is a disjoint cover of all indices.
    pub fn with_split(mut self, mut split: Split) -> Result<Self, DatasetError> {
        split.train.sort_unstable();
        split.test.sort_unstable();
        let mut seen = vec![false; self.len()];
        for &i in split.train.iter().chain(&split.test) {
            match seen.get_mut(i) {
                Some(s) if !*s => *s = true,
                Some(_) => return Err(DatasetError::Config(format!("index {i} appears twice in the split"))),
                None => return Err(DatasetError::Config(format!("split index {i} out of range"))),
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(DatasetError::Config(format!("index {missing} is in neither split")));
        }
        self.split = split;
        Ok(self)
    }

    /// Re-partitions with a seeded shuffle, stratified by label when labels
    /// exist. Each group holds out `floor(len · 0.2)` items.
    pub fn resplit(mut self, seed: u64) -> Self {
        self.split = self.seeded_split(seed);
        self
    }

    fn seeded_split(&self, seed: u64) -> Split {
        let mut groups: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
        for i in 0..self.len() {
            let key = self.labels.as_ref().map_or(0, |l| l[i]);
            groups.entry(key).or_default().push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut split = Split::default();
        for (_, mut members) in groups {
            members.shuffle(&mut rng);
            let n_test = (members.len() as f64 * TEST_FRACTION).floor() as usize;
            split.test.extend_from_slice(&members[..n_test]);
            split.train.extend_from_slice(&members[n_test..]);
        }
        split.train.sort_unstable();
        split.test.sort_unstable();
        split
    }

    /// Content address over pixels and labels: 16 hex digits of SHA-256.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(&self.pixels);
        if let Some(l) = &self.labels {
            h.update(b"labels");
            h.update(l);
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Builds the two-digit dataset used for interpolation: drawings of
/// `digit_a` are labelled 0 and drawings of `digit_b` labelled 1, and the
/// split is stratified 80/20.
pub fn build_drawn_dataset(
    digit_a: &[StrokeSet],
    digit_b: &[StrokeSet],
    num_images_per_digit: usize,
    seed: u64,
) -> Result<DigitDataset, DatasetError> {
    if num_images_per_digit == 0 {
        return Err(DatasetError::Config("num_images_per_digit must be positive".into()));
    }
    if digit_a.len() != num_images_per_digit || digit_b.len() != num_images_per_digit {
        return Err(DatasetError::Config(format!(
            "expected {num_images_per_digit} drawings per digit, got {} for digit_a and {} for digit_b",
            digit_a.len(),
            digit_b.len()
        )));
    }
    let mut pixels = Vec::with_capacity(2 * num_images_per_digit * IMAGE_PIXELS);
    let mut labels = Vec::with_capacity(2 * num_images_per_digit);
    for (label, drawings) in [(0u8, digit_a), (1u8, digit_b)] {
        for strokes in drawings {
            let img = rasterize(strokes)?;
            pixels.extend(img.data().iter().map(|&v| unit_to_byte(v)));
            labels.push(label);
        }
    }
    let ds = DigitDataset::from_pixels(pixels, Some(labels), Provenance::Drawn)?.resplit(seed);
    if ds.split_warning() {
        log::warn!("dataset of {} drawings is too small for a test split; all images train", ds.len());
    }
    Ok(ds)
}

pub(crate) fn byte_to_unit(b: u8) -> f64 {
    b as f64 / 255.0
}

pub(crate) fn unit_to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}
