use std::convert::Infallible;
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use shadowvae_core::dataset::{build_drawn_dataset, parse_idx, rasterize, DigitDataset, StrokeSet, DEFAULT_SPLIT_SEED};
use shadowvae_core::game::{shipped_levels, Action, ActionLog, GameSession, Level};
use shadowvae_core::media::{
    encode_gif, interpolate, interpolate_2d, tile_grid, write_pgm, Endpoint, InterpolationSpec, DEFAULT_FRAME_DELAY_CS,
};
use shadowvae_core::trainer::TrainConfig;
use shadowvae_core::vae::VaeModel;

use crate::error::{parse_json, ApiError};
use crate::jobs::TrainRequest;
use crate::store::{new_id, MediaKind};
use crate::{AppState, SessionEntry};

const MAX_BODY_BYTES: usize = 256 << 20;

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/datasets", post(create_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/train", post(start_training))
        .route("/jobs/{id}", get(get_job).delete(cancel_job))
        .route("/jobs/{id}/events", get(job_events))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/interpolate", post(interpolate_model))
        .route("/models/{id}/interpolate2d", post(interpolate_model_2d))
        .route("/media/{id}", get(get_media))
        .route("/game/levels", get(list_levels))
        .route("/game/sessions", post(create_session))
        .route("/game/sessions/{id}", get(get_session))
        .route("/game/sessions/{id}/actions", post(session_action))
        .route("/game/sessions/{id}/log", get(session_log))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

// ---- datasets ----

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DatasetRequest {
    Strokes {
        digit_a: Vec<StrokeSet>,
        digit_b: Vec<StrokeSet>,
        num_images_per_digit: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Idx {
        /// Base64 IDX3 image file.
        images: String,
        /// Base64 IDX1 label file.
        #[serde(default)]
        labels: Option<String>,
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn decode_base64(field: &str, text: &str) -> ApiResult<Vec<u8>> {
    BASE64
        .decode(text.trim())
        .map_err(|e| ApiError::unprocessable("invalid_base64", format!("{field}: {e}")))
}

fn dataset_summary(id: &str, ds: &DigitDataset) -> Value {
    json!({
        "dataset_id": id,
        "fingerprint": ds.fingerprint(),
        "provenance": ds.provenance(),
        "len": ds.len(),
        "train": ds.split().train.len(),
        "test": ds.split().test.len(),
        "split_warning": ds.split_warning(),
    })
}

async fn create_dataset(State(app): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: DatasetRequest = parse_json(&body)?;
    let dataset = match req {
        DatasetRequest::Strokes {
            digit_a,
            digit_b,
            num_images_per_digit,
            seed,
        } => build_drawn_dataset(&digit_a, &digit_b, num_images_per_digit, seed.unwrap_or(DEFAULT_SPLIT_SEED))?,
        DatasetRequest::Idx { images, labels, seed } => {
            let images = decode_base64("images", &images)?;
            let labels = labels.map(|l| decode_base64("labels", &l)).transpose()?;
            let ds = parse_idx(&images, labels.as_deref())?;
            match seed {
                Some(s) => ds.resplit(s),
                None => ds,
            }
        }
    };
    let (id, _) = app.inner.store.put_dataset(&dataset)?;
    Ok((StatusCode::CREATED, Json(dataset_summary(&id, &dataset))))
}

async fn get_dataset(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let (ds, manifest) = app
        .inner
        .store
        .get_dataset(&id)?
        .ok_or_else(|| ApiError::not_found("dataset", &id))?;
    let mut summary = dataset_summary(&id, &ds);
    summary["created_at"] = json!(manifest.created_at);
    Ok(Json(summary))
}

// ---- training ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainBody {
    dataset_id: String,
    #[serde(default)]
    config: TrainConfig,
    #[serde(default)]
    model_id: Option<String>,
}

async fn start_training(State(app): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: TrainBody = parse_json(&body)?;
    let record = app.inner.jobs.submit(TrainRequest {
        dataset_id: req.dataset_id,
        config: req.config,
        model_id: req.model_id,
    })?;
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": record.id, "model_id": record.model_id, "state": record.state })),
    ))
}

async fn get_job(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = app.inner.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(json!(job.snapshot())))
}

async fn cancel_job(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(app.inner.jobs.cancel(&id)?)))
}

/// Newline-delimited JSON progress events. The stream replays events so
/// far, follows new ones and ends when the job finishes.
async fn job_events(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let job = app.inner.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    let rx = job.subscribe();
    let stream = futures_util::stream::unfold((job, rx, 0usize, false), |(job, mut rx, sent, done)| async move {
        if done {
            return None;
        }
        loop {
            rx.borrow_and_update();
            let rec = job.snapshot();
            let finished = rec.state.is_terminal();
            if rec.events.len() > sent {
                let mut chunk = String::new();
                for event in &rec.events[sent..] {
                    chunk.push_str(&serde_json::to_string(event).expect("serializable"));
                    chunk.push('\n');
                }
                let next = (job, rx, rec.events.len(), finished);
                return Some((Ok::<_, Infallible>(Bytes::from(chunk)), next));
            }
            if finished || rx.changed().await.is_err() {
                return None;
            }
        }
    });
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], Body::from_stream(stream)).into_response())
}

// ---- models and media ----

fn load_model(app: &AppState, id: &str) -> ApiResult<VaeModel> {
    app.inner
        .store
        .get_model(id)?
        .ok_or_else(|| ApiError::not_found("model", id))
}

async fn get_model(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let meta = app
        .inner
        .store
        .get_model_meta(&id)?
        .ok_or_else(|| ApiError::not_found("model", &id))?;
    Ok(Json(json!(meta)))
}

/// Where an interpolation endpoint comes from.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum EndpointRef {
    /// 784 intensities in [0, 1].
    Image { pixels: Vec<f64> },
    Latent { z: Vec<f64> },
    Strokes(StrokeSet),
    DatasetImage { dataset_id: String, index: usize },
}

fn resolve(app: &AppState, r: EndpointRef) -> ApiResult<Endpoint> {
    Ok(match r {
        EndpointRef::Image { pixels } => Endpoint::Image(pixels),
        EndpointRef::Latent { z } => Endpoint::Latent(z),
        EndpointRef::Strokes(strokes) => Endpoint::Image(rasterize(&strokes)?.data().to_vec()),
        EndpointRef::DatasetImage { dataset_id, index } => {
            let (ds, _) = app
                .inner
                .store
                .get_dataset(&dataset_id)?
                .ok_or_else(|| ApiError::not_found("dataset", &dataset_id))?;
            if index >= ds.len() {
                return Err(ApiError::unprocessable(
                    "index_out_of_range",
                    format!("image {index} requested from a dataset of {}", ds.len()),
                ));
            }
            Endpoint::Image(ds.image(index).data().to_vec())
        }
    })
}

fn default_true() -> bool {
    true
}

fn default_delay() -> u16 {
    DEFAULT_FRAME_DELAY_CS
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolateBody {
    endpoint_a: EndpointRef,
    endpoint_b: EndpointRef,
    num_images: usize,
    #[serde(default = "default_true")]
    show_gif_only: bool,
    #[serde(default = "default_delay")]
    frame_delay_cs: u16,
    #[serde(default = "default_true")]
    loop_forever: bool,
}

async fn interpolate_model(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: InterpolateBody = parse_json(&body)?;
    let model = load_model(&app, &id)?;
    let spec = InterpolationSpec {
        endpoint_a: resolve(&app, req.endpoint_a)?,
        endpoint_b: resolve(&app, req.endpoint_b)?,
        num_images: req.num_images,
        show_gif_only: req.show_gif_only,
        frame_delay_cs: req.frame_delay_cs,
    };
    let frames = interpolate(&model, &spec)?;
    let store = &app.inner.store;
    let media_id = store.put_media(MediaKind::Gif, &encode_gif(&frames, spec.frame_delay_cs, req.loop_forever))?;
    let mut frame_ids = Vec::new();
    if !spec.show_gif_only {
        for frame in frames.frames() {
            frame_ids.push(store.put_media(MediaKind::Pgm, &write_pgm(frame))?);
        }
    }
    Ok((
        StatusCode::CREATED,
        Json(json!({ "media_id": media_id, "num_frames": frames.len(), "frame_ids": frame_ids })),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Interpolate2dBody {
    /// Top-left, top-right, bottom-left, bottom-right.
    corners: [EndpointRef; 4],
    grid_n: usize,
}

async fn interpolate_model_2d(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: Interpolate2dBody = parse_json(&body)?;
    let model = load_model(&app, &id)?;
    let [a, b, c, d] = req.corners;
    let corners = [resolve(&app, a)?, resolve(&app, b)?, resolve(&app, c)?, resolve(&app, d)?];
    let grid = interpolate_2d(&model, &corners, req.grid_n)?;
    let sheet = tile_grid(&grid)?;
    let media_id = app.inner.store.put_media(MediaKind::Pgm, &write_pgm(&sheet))?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "media_id": media_id, "grid_n": req.grid_n, "width": sheet.width(), "height": sheet.height() })),
    ))
}

async fn get_media(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (kind, bytes) = app
        .inner
        .store
        .get_media(&id)?
        .ok_or_else(|| ApiError::not_found("media", &id))?;
    Ok(([(header::CONTENT_TYPE, kind.content_type())], bytes).into_response())
}

// ---- game ----

async fn list_levels() -> Json<Value> {
    Json(json!(shipped_levels()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LevelRef {
    Name(String),
    Custom(Level),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionBody {
    level: LevelRef,
    #[serde(default)]
    seed: u64,
}

fn session_view(id: &str, session: &GameSession) -> Value {
    json!({ "session_id": id, "complete": session.is_complete(), "state": session })
}

fn find_session(app: &AppState, id: &str) -> ApiResult<Arc<Mutex<SessionEntry>>> {
    app.inner
        .sessions
        .lock()
        .unwrap()
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("session", id))
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: SessionBody = parse_json(&body)?;
    let level = match req.level {
        LevelRef::Name(name) => shipped_levels()
            .into_iter()
            .find(|l| l.name == name)
            .ok_or_else(|| ApiError::not_found("level", &name))?,
        LevelRef::Custom(level) => {
            level
                .validate()
                .map_err(|e| ApiError::unprocessable("invalid_level", e.to_string()))?;
            level
        }
    };
    let id = new_id();
    let log = ActionLog::new(level.clone(), req.seed);
    app.inner.store.put_session_log(&id, &log.to_jsonl())?;
    let session = GameSession::new(level, req.seed);
    let view = session_view(&id, &session);
    app.inner
        .sessions
        .lock()
        .unwrap()
        .insert(id, Arc::new(Mutex::new(SessionEntry { session, log })));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let entry = find_session(&app, &id)?;
    let entry = entry.lock().unwrap();
    Ok(Json(session_view(&id, &entry.session)))
}

/// Applies one action. Accepted actions are appended to the session's log
/// on disk; rejected ones leave both state and log unchanged.
async fn session_action(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let entry = find_session(&app, &id)?;
    let action: Action = parse_json(&body)?;
    let mut entry = entry.lock().unwrap();
    let outcome = entry.session.apply(&action)?;
    entry.log.actions.push(action);
    app.inner.store.put_session_log(&id, &entry.log.to_jsonl())?;
    let mut view = session_view(&id, &entry.session);
    view["outcome"] = json!(outcome);
    Ok(Json(view))
}

async fn session_log(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = find_session(&app, &id)?;
    let text = entry.lock().unwrap().log.to_jsonl();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}
