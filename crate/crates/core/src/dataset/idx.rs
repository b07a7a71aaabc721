//! MNIST IDX container: big-endian u32 magic and extents, then raw bytes.

use super::{DatasetError, DigitDataset, Provenance};
use crate::IMAGE_SIDE;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32, DatasetError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or(DatasetError::Truncated {
            what,
            expected: at + 4,
            found: bytes.len(),
        })
}

fn check_payload(bytes: &[u8], header: usize, payload: usize, what: &'static str) -> Result<(), DatasetError> {
    let expected = header + payload;
    if bytes.len() < expected {
        return Err(DatasetError::Truncated {
            what,
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DatasetError::TrailingBytes {
            what,
            extra: bytes.len() - expected,
        });
    }
    Ok(())
}

/// Parses an IDX image file (and optional label file) into a dataset with
/// the default split. Pixels map to `byte / 255`.
pub fn parse_idx(images: &[u8], labels: Option<&[u8]>) -> Result<DigitDataset, DatasetError> {
    let magic = read_u32(images, 0, "image file")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DatasetError::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32(images, 4, "image file")? as usize;
    let rows = read_u32(images, 8, "image file")? as usize;
    let cols = read_u32(images, 12, "image file")? as usize;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(DatasetError::ImageSize { rows, cols });
    }
    check_payload(images, 16, count * rows * cols, "image file")?;

    let labels = match labels {
        None => None,
        Some(bytes) => {
            let magic = read_u32(bytes, 0, "label file")?;
            if magic != IDX_LABELS_MAGIC {
                return Err(DatasetError::BadMagic {
                    expected: IDX_LABELS_MAGIC,
                    found: magic,
                });
            }
            let n = read_u32(bytes, 4, "label file")? as usize;
            if n != count {
                return Err(DatasetError::CountMismatch { images: count, labels: n });
            }
            check_payload(bytes, 8, n, "label file")?;
            Some(bytes[8..].to_vec())
        }
    };

    DigitDataset::from_pixels(images[16..].to_vec(), labels, Provenance::Mnist)
}

/// Serializes the images (and labels, if any) back to IDX bytes.
pub fn write_idx(dataset: &DigitDataset) -> (Vec<u8>, Option<Vec<u8>>) {
    let mut images = Vec::with_capacity(16 + dataset.pixels().len());
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    images.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    images.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
    images.extend_from_slice(dataset.pixels());

    let labels = dataset.labels().map(|l| {
        let mut out = Vec::with_capacity(8 + l.len());
        out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(l.len() as u32).to_be_bytes());
        out.extend_from_slice(l);
        out
    });
    (images, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::IMAGE_PIXELS;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    #[test]
    fn single_blank_image() {
        let mut bytes = header(IDX_IMAGES_MAGIC, &[1, 28, 28]);
        bytes.extend(std::iter::repeat_n(0u8, IMAGE_PIXELS));
        let ds = parse_idx(&bytes, None).unwrap();
        assert_eq!(ds.len(), 1);
        assert!(ds.image(0).data().iter().all(|&v| v == 0.0));
        assert_eq!(ds.provenance(), Provenance::Mnist);
    }

    #[test]
    fn bad_magic() {
        let bytes = header(0, &[1, 28, 28]);
        assert!(matches!(parse_idx(&bytes, None), Err(DatasetError::BadMagic { found: 0, .. })));
        let mut images = header(IDX_IMAGES_MAGIC, &[0, 28, 28]);
        images.truncate(16);
        let labels = header(IDX_IMAGES_MAGIC, &[0]);
        assert!(matches!(
            parse_idx(&images, Some(&labels)),
            Err(DatasetError::BadMagic { expected: IDX_LABELS_MAGIC, .. })
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = header(IDX_IMAGES_MAGIC, &[2, 28, 28]);
        bytes.extend(std::iter::repeat_n(0u8, IMAGE_PIXELS + 3));
        assert!(matches!(parse_idx(&bytes, None), Err(DatasetError::Truncated { .. })));
        assert!(matches!(parse_idx(&bytes[..10], None), Err(DatasetError::Truncated { .. })));
    }

    #[test]
    fn trailing_bytes() {
        let mut bytes = header(IDX_IMAGES_MAGIC, &[1, 28, 28]);
        bytes.extend(std::iter::repeat_n(0u8, IMAGE_PIXELS + 1));
        assert!(matches!(parse_idx(&bytes, None), Err(DatasetError::TrailingBytes { extra: 1, .. })));
    }

    #[test]
    fn label_count_mismatch() {
        let mut images = header(IDX_IMAGES_MAGIC, &[1, 28, 28]);
        images.extend(std::iter::repeat_n(0u8, IMAGE_PIXELS));
        let mut labels = header(IDX_LABELS_MAGIC, &[2]);
        labels.extend([3, 4]);
        assert!(matches!(
            parse_idx(&images, Some(&labels)),
            Err(DatasetError::CountMismatch { images: 1, labels: 2 })
        ));
    }

    #[test]
    fn wrong_image_size() {
        let bytes = header(IDX_IMAGES_MAGIC, &[0, 32, 32]);
        assert!(matches!(parse_idx(&bytes, None), Err(DatasetError::ImageSize { rows: 32, cols: 32 })));
    }

    #[test]
    fn pixels_scale_by_255() {
        let mut bytes = header(IDX_IMAGES_MAGIC, &[1, 28, 28]);
        bytes.extend((0..IMAGE_PIXELS).map(|i| (i % 256) as u8));
        let ds = parse_idx(&bytes, None).unwrap();
        let img = ds.image(0);
        assert_eq!(img.data()[255], 1.0);
        assert_eq!(img.data()[51], 0.2);
    }
}
