//! A persisted dataset is a directory holding IDX image/label files and a
//! JSON manifest with the split.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{parse_idx, write_idx, DatasetError, DigitDataset, Provenance, Split};

pub const IMAGES_FILE: &str = "images-idx3-ubyte";
pub const LABELS_FILE: &str = "labels-idx1-ubyte";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub id: String,
    pub provenance: Provenance,
    pub split: Split,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

pub fn save_dataset(dir: &Path, dataset: &DigitDataset) -> Result<DatasetManifest, DatasetError> {
    fs::create_dir_all(dir)?;
    let (images, labels) = write_idx(dataset);
    fs::write(dir.join(IMAGES_FILE), images)?;
    match labels {
        Some(l) => fs::write(dir.join(LABELS_FILE), l)?,
        None => {
            if dir.join(LABELS_FILE).exists() {
                fs::remove_file(dir.join(LABELS_FILE))?;
            }
        }
    }
    let manifest = DatasetManifest {
        id: dataset.fingerprint(),
        provenance: dataset.provenance(),
        split: dataset.split().clone(),
        created_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<(DigitDataset, DatasetManifest), DatasetError> {
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    let images = fs::read(dir.join(IMAGES_FILE))?;
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        Some(fs::read(labels_path)?)
    } else {
        None
    };
    let mut dataset = parse_idx(&images, labels.as_deref())?.with_split(manifest.split.clone())?;
    dataset.provenance = manifest.provenance;
    Ok((dataset, manifest))
}
