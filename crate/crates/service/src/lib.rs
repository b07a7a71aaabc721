//! HTTP service for the VAE toolkit: dataset upload, background training
//! jobs with streamed progress, interpolation media and shadow-game sessions.
//!
//! Configuration comes from the environment:
//!
//! | variable | default |
//! |---|---|
//! | `SHADOWVAE_PORT` | `8080` |
//! | `SHADOWVAE_DATA_DIR` | `./shadowvae-data` |
//! | `SHADOWVAE_WORKERS` | `1` |

mod error;
mod jobs;
mod routes;
mod store;

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use shadowvae_core::game::{replay, ActionLog, GameSession};

pub use error::ApiError;
pub use jobs::{JobFailure, JobRecord, JobState};
pub use routes::router;
pub use store::{new_id, now_secs, valid_id, MediaKind, ModelMeta, Store};

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Number of training worker threads.
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("./shadowvae-data"),
            workers: 1,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(dir) = std::env::var("SHADOWVAE_DATA_DIR") {
            cfg.data_dir = dir.into();
        }
        if let Some(n) = std::env::var("SHADOWVAE_WORKERS").ok().and_then(|v| v.parse().ok()) {
            cfg.workers = n;
        }
        cfg
    }
}

/// Port from `SHADOWVAE_PORT`, or [`DEFAULT_PORT`].
pub fn port_from_env() -> u16 {
    std::env::var("SHADOWVAE_PORT")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

pub(crate) struct SessionEntry {
    pub session: GameSession,
    pub log: ActionLog,
}

pub(crate) struct Inner {
    pub store: Store,
    pub jobs: jobs::JobManager,
    pub sessions: Mutex<HashMap<String, Arc<Mutex<SessionEntry>>>>,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Inner>,
}

impl AppState {
    /// Opens the data directory, starts the training workers and restores
    /// game sessions from their action logs.
    pub fn open(config: &ServiceConfig) -> io::Result<Self> {
        let store = Store::open(&config.data_dir)?;
        let mut sessions = HashMap::new();
        for (id, text) in store.session_logs()? {
            match ActionLog::from_jsonl(&text) {
                Ok(log) => {
                    let session = replay(&log);
                    sessions.insert(id, Arc::new(Mutex::new(SessionEntry { session, log })));
                }
                Err(e) => log::warn!("skipping unreadable session log {id}: {e}"),
            }
        }
        let jobs = jobs::JobManager::start(store.clone(), config.workers);
        Ok(Self {
            inner: Arc::new(Inner {
                store,
                jobs,
                sessions: Mutex::new(sessions),
            }),
        })
    }
}

/// Serves the API on `listener` until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, config: &ServiceConfig) -> io::Result<()> {
    let state = AppState::open(config)?;
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("listening on http://{addr} with data in {}", config.data_dir.display());
    axum::serve(listener, router(state)).await
}
