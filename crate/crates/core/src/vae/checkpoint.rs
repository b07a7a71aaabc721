//! Binary checkpoint layout, all integers and reals little-endian:
//!
//! ```text
//! "LVAE" | version: u16 | hidden: u32 | latent: u32 |
//! for each layer in forward order: weights (row-major f64) then bias (f64)
//! ```

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::model::{LayerId, VaeModel};
use crate::numerics::ParamKind;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LVAE";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checkpoint has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("invalid model dimensions hidden={hidden} latent={latent}")]
    InvalidDims { hidden: u32, latent: u32 },
    #[error("checkpoint contains non-finite parameters")]
    NonFinite,
}

const HEADER_LEN: usize = 4 + 2 + 4 + 4;

impl VaeModel {
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.parameter_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.hidden_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.latent_dim() as u32).to_le_bytes());
        for (_, layer) in self.layers() {
            for kind in [ParamKind::Weights, ParamKind::Bias] {
                for v in layer.param(kind).data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 4 && &bytes[..4] != CHECKPOINT_MAGIC {
                return Err(CheckpointError::BadMagic);
            }
            return Err(CheckpointError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let hidden = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        let latent = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
        let mut model = VaeModel::zeros(hidden as usize, latent as usize)
            .map_err(|_| CheckpointError::InvalidDims { hidden, latent })?;

        let expected = HEADER_LEN + 8 * model.parameter_count();
        if bytes.len() < expected {
            return Err(CheckpointError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(CheckpointError::TrailingBytes(bytes.len() - expected));
        }

        let mut chunks = bytes[HEADER_LEN..].chunks_exact(8);
        for id in LayerId::ALL {
            let layer = model.layer_mut(id);
            for kind in [ParamKind::Weights, ParamKind::Bias] {
                for slot in layer.param_mut(kind).data_mut() {
                    let v = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
                    if !v.is_finite() {
                        return Err(CheckpointError::NonFinite);
                    }
                    *slot = v;
                }
            }
        }
        Ok(model)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers()
            .map(|(_, l)| l.weights().len() + l.bias().len())
            .sum()
    }

    /// Content address of the parameters: first 16 hex digits of the
    /// checkpoint's SHA-256.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_checkpoint());
        hex::encode(&digest[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = VaeModel::new(6, 3, &mut rng).unwrap();
        let bytes = model.to_checkpoint();
        assert_eq!(&bytes[..4], b"LVAE");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        let back = VaeModel::from_checkpoint(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_checkpoint(), bytes);
    }

    #[test]
    fn layout_is_little_endian_row_major() {
        let mut model = VaeModel::zeros(1, 1).unwrap();
        model.layer_mut(LayerId::EncHidden).param_mut(ParamKind::Weights).data_mut()[1] = 2.5;
        let bytes = model.to_checkpoint();
        assert_eq!(&bytes[6..14], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[HEADER_LEN + 8..HEADER_LEN + 16], &2.5f64.to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_input() {
        let model = VaeModel::zeros(2, 2).unwrap();
        let bytes = model.to_checkpoint();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(VaeModel::from_checkpoint(&bad), Err(CheckpointError::BadMagic));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(VaeModel::from_checkpoint(&bad), Err(CheckpointError::UnsupportedVersion(9)));
        assert!(matches!(
            VaeModel::from_checkpoint(&bytes[..bytes.len() - 1]),
            Err(CheckpointError::Truncated { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(VaeModel::from_checkpoint(&long), Err(CheckpointError::TrailingBytes(1)));
        let mut nan = bytes;
        nan[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(VaeModel::from_checkpoint(&nan), Err(CheckpointError::NonFinite));
    }
}
