//! Training jobs: a registry of job records and a pool of worker threads
//! that run them.
//!
//! A job moves `queued → running → done | failed | cancelled`, or straight
//! from `queued` to `cancelled`. Whoever moves a job into a terminal state
//! also releases its model id, so at most one unfinished job exists per
//! model.

use std::collections::{HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};
use shadowvae_core::trainer::{train, ProgressEvent, ProgressSink, TrainConfig, TrainError, TrainReport};
use tokio::sync::watch;

use crate::error::{train_reason, ApiError};
use crate::store::{new_id, now_secs, ModelMeta, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Cancelled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub reason: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: String,
    pub state: JobState,
    pub model_id: String,
    pub dataset_id: String,
    pub config: TrainConfig,
    pub events: Vec<ProgressEvent>,
    pub error: Option<JobFailure>,
    pub report: Option<TrainReport>,
    pub created_at: u64,
}

pub struct Job {
    record: Mutex<JobRecord>,
    cancel: AtomicBool,
    /// Bumped on every change to the record.
    version: watch::Sender<u64>,
}

impl Job {
    pub fn snapshot(&self) -> JobRecord {
        self.record.lock().unwrap().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.version.subscribe()
    }

    fn update<T>(&self, f: impl FnOnce(&mut JobRecord) -> T) -> T {
        let out = f(&mut self.record.lock().unwrap());
        self.version.send_modify(|v| *v += 1);
        out
    }
}

struct Shared {
    store: Store,
    busy_models: Mutex<HashSet<String>>,
}

impl Shared {
    fn release(&self, model_id: &str) {
        self.busy_models.lock().unwrap().remove(model_id);
    }

    /// Moves the job to `state` unless it already finished. Returns whether
    /// this call made the transition.
    fn finish(&self, job: &Job, state: JobState, error: Option<JobFailure>, report: Option<TrainReport>) -> bool {
        let model_id = job.update(|r| {
            if r.state.is_terminal() {
                return None;
            }
            r.state = state;
            r.error = error;
            r.report = report;
            Some(r.model_id.clone())
        });
        match model_id {
            Some(id) => {
                self.release(&id);
                true
            }
            None => false,
        }
    }
}

pub struct JobManager {
    shared: Arc<Shared>,
    jobs: Mutex<HashMap<String, Arc<Job>>>,
    queue: Mutex<mpsc::Sender<Arc<Job>>>,
}

pub struct TrainRequest {
    pub dataset_id: String,
    pub config: TrainConfig,
    /// Continue training this stored model instead of creating a new one.
    pub model_id: Option<String>,
}

impl JobManager {
    pub fn start(store: Store, workers: usize) -> Self {
        let shared = Arc::new(Shared {
            store,
            busy_models: Mutex::new(HashSet::new()),
        });
        let (tx, rx) = mpsc::channel::<Arc<Job>>();
        let rx = Arc::new(Mutex::new(rx));
        for n in 0..workers.max(1) {
            let rx = Arc::clone(&rx);
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name(format!("train-worker-{n}"))
                .spawn(move || loop {
                    let next = rx.lock().unwrap().recv();
                    match next {
                        Ok(job) => run_job(&shared, &job),
                        Err(_) => break,
                    }
                })
                .expect("spawn training worker");
        }
        Self {
            shared,
            jobs: Mutex::new(HashMap::new()),
            queue: Mutex::new(tx),
        }
    }

    pub fn get(&self, id: &str) -> Option<Arc<Job>> {
        self.jobs.lock().unwrap().get(id).cloned()
    }

    pub fn submit(&self, req: TrainRequest) -> Result<JobRecord, ApiError> {
        let store = &self.shared.store;
        if store.get_dataset(&req.dataset_id)?.is_none() {
            return Err(ApiError::not_found("dataset", &req.dataset_id));
        }
        let mut config = req.config;
        let model_id = match req.model_id {
            Some(id) => {
                let meta = store
                    .get_model_meta(&id)?
                    .ok_or_else(|| ApiError::not_found("model", &id))?;
                config.hidden_dim = meta.hidden_dim;
                config.latent_dim = meta.latent_dim;
                id
            }
            None => new_id(),
        };
        config.validate()?;

        if !self.shared.busy_models.lock().unwrap().insert(model_id.clone()) {
            return Err(ApiError::conflict(
                "model_busy",
                format!("model {model_id} already has an unfinished training job"),
            ));
        }
        let record = JobRecord {
            id: new_id(),
            kind: "train".into(),
            state: JobState::Queued,
            model_id,
            dataset_id: req.dataset_id,
            config,
            events: Vec::new(),
            error: None,
            report: None,
            created_at: now_secs(),
        };
        let job = Arc::new(Job {
            record: Mutex::new(record.clone()),
            cancel: AtomicBool::new(false),
            version: watch::channel(0).0,
        });
        self.jobs.lock().unwrap().insert(record.id.clone(), Arc::clone(&job));
        if self.queue.lock().unwrap().send(job).is_err() {
            self.shared.release(&record.model_id);
            return Err(ApiError::internal("training workers are not running"));
        }
        Ok(record)
    }

    /// Cancels a queued job immediately, or asks a running one to stop at
    /// the next batch boundary.
    pub fn cancel(&self, id: &str) -> Result<JobRecord, ApiError> {
        let job = self.get(id).ok_or_else(|| ApiError::not_found("job", id))?;
        job.cancel.store(true, Ordering::SeqCst);
        let state = job.snapshot().state;
        match state {
            JobState::Queued => {
                self.shared.finish(&job, JobState::Cancelled, None, None);
            }
            JobState::Running => {}
            _ => {
                return Err(ApiError::conflict(
                    "job_finished",
                    format!("job {id} already finished ({state:?})"),
                ))
            }
        }
        Ok(job.snapshot())
    }
}

struct JobSink<'a> {
    job: &'a Job,
}

impl ProgressSink for JobSink<'_> {
    fn on_epoch(&mut self, event: &ProgressEvent) {
        self.job.update(|r| r.events.push(event.clone()));
    }

    fn should_cancel(&self) -> bool {
        self.job.cancel.load(Ordering::SeqCst)
    }
}

fn failure(reason: &str, message: impl Into<String>) -> Option<JobFailure> {
    Some(JobFailure {
        reason: reason.into(),
        message: message.into(),
    })
}

fn run_job(shared: &Shared, job: &Job) {
    let started = job.update(|r| {
        if r.state != JobState::Queued {
            return None;
        }
        r.state = JobState::Running;
        Some(r.clone())
    });
    let Some(record) = started else { return };
    if job.cancel.load(Ordering::SeqCst) {
        shared.finish(job, JobState::Cancelled, None, None);
        return;
    }
    log::info!("job {} training model {} on dataset {}", record.id, record.model_id, record.dataset_id);

    let outcome = catch_unwind(AssertUnwindSafe(|| train_job(shared, job, &record)));
    match outcome {
        Ok(Ok((report, model))) => {
            let meta = ModelMeta {
                id: record.model_id.clone(),
                hidden_dim: model.hidden_dim(),
                latent_dim: model.latent_dim(),
                fingerprint: model.fingerprint(),
                dataset_id: Some(record.dataset_id.clone()),
                config: Some(record.config.clone()),
                report: Some(report.clone()),
                updated_at: now_secs(),
            };
            match shared.store.put_model(&model, &meta) {
                Ok(()) => {
                    shared.finish(job, JobState::Done, None, Some(report));
                }
                Err(e) => {
                    shared.finish(job, JobState::Failed, failure("io", e.to_string()), None);
                }
            }
        }
        Ok(Err(JobError::Train(TrainError::Cancelled { .. }))) => {
            shared.finish(job, JobState::Cancelled, None, None);
        }
        Ok(Err(JobError::Train(e))) => {
            shared.finish(job, JobState::Failed, failure(train_reason(&e), e.to_string()), None);
        }
        Ok(Err(JobError::Setup(reason, message))) => {
            shared.finish(job, JobState::Failed, failure(reason, message), None);
        }
        Err(_) => {
            shared.finish(job, JobState::Failed, failure("internal", "training worker panicked"), None);
        }
    }
}

enum JobError {
    Train(TrainError),
    Setup(&'static str, String),
}

fn train_job(
    shared: &Shared,
    job: &Job,
    record: &JobRecord,
) -> Result<(TrainReport, shadowvae_core::vae::VaeModel), JobError> {
    let (dataset, _) = shared
        .store
        .get_dataset(&record.dataset_id)
        .map_err(|e| JobError::Setup(e.reason(), e.to_string()))?
        .ok_or_else(|| JobError::Setup("not_found", format!("dataset {} disappeared", record.dataset_id)))?;
    let existing = shared
        .store
        .get_model(&record.model_id)
        .map_err(|e| JobError::Setup("io", e.to_string()))?;
    // Always train a copy: the stored model only changes on success.
    let mut model = match existing {
        Some(m) => m,
        None => record.config.init_model().map_err(JobError::Train)?,
    };
    let mut sink = JobSink { job };
    let report = train(&mut model, &dataset, &record.config, &mut sink).map_err(JobError::Train)?;
    Ok((report, model))
}
