//! On-disk layout under the data directory:
//!
//! ```text
//! datasets/<id>/   IDX pair + manifest.json
//! models/<id>/     model.lvae + meta.json
//! media/<id>.gif | <id>.pgm
//! sessions/<id>.jsonl   action log, replayed on startup
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use shadowvae_core::dataset::{load_dataset, save_dataset, DatasetError, DatasetManifest, DigitDataset};
use shadowvae_core::trainer::{TrainConfig, TrainReport};
use shadowvae_core::vae::VaeModel;

const MODEL_FILE: &str = "model.lvae";
const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Gif,
    Pgm,
}

impl MediaKind {
    pub fn extension(self) -> &'static str {
        match self {
            MediaKind::Gif => "gif",
            MediaKind::Pgm => "pgm",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            MediaKind::Gif => "image/gif",
            MediaKind::Pgm => "image/x-portable-graymap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub id: String,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    /// Content fingerprint of the current parameters.
    pub fingerprint: String,
    pub dataset_id: Option<String>,
    pub config: Option<TrainConfig>,
    pub report: Option<TrainReport>,
    pub updated_at: u64,
}

pub fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

/// Ids are generated by the service; anything else cannot name a stored
/// object and must not reach the filesystem.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: &Path) -> io::Result<Self> {
        for sub in ["datasets", "models", "media", "sessions"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dataset_dir(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(id)
    }

    fn model_dir(&self, id: &str) -> PathBuf {
        self.root.join("models").join(id)
    }

    pub fn put_dataset(&self, dataset: &DigitDataset) -> Result<(String, DatasetManifest), DatasetError> {
        let id = new_id();
        let manifest = self.put_dataset_as(&id, dataset)?;
        Ok((id, manifest))
    }

    /// Stores under a caller-chosen id, replacing any dataset already there.
    pub fn put_dataset_as(&self, id: &str, dataset: &DigitDataset) -> Result<DatasetManifest, DatasetError> {
        if !valid_id(id) {
            return Err(DatasetError::Config(format!("invalid dataset id {id:?}")));
        }
        save_dataset(&self.dataset_dir(id), dataset)
    }

    pub fn get_dataset(&self, id: &str) -> Result<Option<(DigitDataset, DatasetManifest)>, DatasetError> {
        let dir = self.dataset_dir(id);
        if !valid_id(id) || !dir.is_dir() {
            return Ok(None);
        }
        load_dataset(&dir).map(Some)
    }

    pub fn has_model(&self, id: &str) -> bool {
        valid_id(id) && self.model_dir(id).join(MODEL_FILE).is_file()
    }

    pub fn put_model(&self, model: &VaeModel, meta: &ModelMeta) -> io::Result<()> {
        let dir = self.model_dir(&meta.id);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(MODEL_FILE), &model.to_checkpoint())?;
        write_atomic(&dir.join(META_FILE), &serde_json::to_vec_pretty(meta)?)
    }

    pub fn get_model(&self, id: &str) -> io::Result<Option<VaeModel>> {
        if !self.has_model(id) {
            return Ok(None);
        }
        let bytes = fs::read(self.model_dir(id).join(MODEL_FILE))?;
        VaeModel::from_checkpoint(&bytes)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn get_model_meta(&self, id: &str) -> io::Result<Option<ModelMeta>> {
        if !self.has_model(id) {
            return Ok(None);
        }
        let bytes = fs::read(self.model_dir(id).join(META_FILE))?;
        Ok(Some(serde_json::from_slice(&bytes)?))
    }

    pub fn put_media(&self, kind: MediaKind, bytes: &[u8]) -> io::Result<String> {
        let id = new_id();
        write_atomic(&self.root.join("media").join(format!("{id}.{}", kind.extension())), bytes)?;
        Ok(id)
    }

    pub fn get_media(&self, id: &str) -> io::Result<Option<(MediaKind, Vec<u8>)>> {
        if !valid_id(id) {
            return Ok(None);
        }
        for kind in [MediaKind::Gif, MediaKind::Pgm] {
            let path = self.root.join("media").join(format!("{id}.{}", kind.extension()));
            if path.is_file() {
                return Ok(Some((kind, fs::read(path)?)));
            }
        }
        Ok(None)
    }

    pub fn put_session_log(&self, id: &str, jsonl: &str) -> io::Result<()> {
        write_atomic(&self.root.join("sessions").join(format!("{id}.jsonl")), jsonl.as_bytes())
    }

    /// Every stored session log as `(id, text)`.
    pub fn session_logs(&self) -> io::Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("sessions"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(id) = path.file_stem().and_then(|s| s.to_str()) {
                    out.push((id.to_string(), fs::read_to_string(&path)?));
                }
            }
        }
        out.sort();
        Ok(out)
    }
}
