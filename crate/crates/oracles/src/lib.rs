//! Test support: reference implementations the library is checked against,
//! plus fixtures and synthetic drawings.
//!
//! Everything here is written the slow, obvious way and shares no code path
//! with the implementation it checks: nested loops instead of tensor ops,
//! brute-force enumeration instead of group structure, plain parsing instead
//! of the library's readers.

pub mod drawings;
pub mod grad;
pub mod kl;
pub mod pgm;
pub mod raster;
pub mod voxel;

use std::path::PathBuf;

/// Directory holding the small MNIST 0/1 fixture shipped with the repo.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// The fixture's images as unit-scaled rows and its labels.
pub fn fixture_images() -> (Vec<Vec<f64>>, Vec<u8>) {
    let dir = fixture_dir();
    let images = std::fs::read(dir.join("mnist01-images-idx3-ubyte")).expect("fixture images");
    let labels = std::fs::read(dir.join("mnist01-labels-idx1-ubyte")).expect("fixture labels");
    let be = |b: &[u8]| u32::from_be_bytes([b[0], b[1], b[2], b[3]]) as usize;
    assert_eq!(be(&images[0..4]), 0x803);
    let (n, rows, cols) = (be(&images[4..8]), be(&images[8..12]), be(&images[12..16]));
    let px = rows * cols;
    let rows_out = (0..n)
        .map(|i| images[16 + i * px..16 + (i + 1) * px].iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    (rows_out, labels[8..8 + n].to_vec())
}
