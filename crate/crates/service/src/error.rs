use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use shadowvae_core::dataset::DatasetError;
use shadowvae_core::game::GameError;
use shadowvae_core::media::MediaError;
use shadowvae_core::trainer::TrainError;

/// Error body: `{"error": {"reason": ..., "message": ...}}`. `reason` is a
/// stable snake_case code; `message` is for humans.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub reason: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, reason: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status,
            reason: reason.into(),
            message: message.into(),
        }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no {what} with id {id}"))
    }

    pub fn bad_request(reason: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, reason, message)
    }

    pub fn unprocessable(reason: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, reason, message)
    }

    pub fn conflict(reason: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, reason, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "reason": self.reason, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<DatasetError> for ApiError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(io) => ApiError::internal(io.to_string()),
            other => ApiError::unprocessable(other.reason(), other.to_string()),
        }
    }
}

impl From<MediaError> for ApiError {
    fn from(e: MediaError) -> Self {
        let reason = match &e {
            MediaError::Spec(_) => "invalid_spec",
            MediaError::Model(_) => "model_mismatch",
            MediaError::Image(_) => "invalid_image",
        };
        ApiError::unprocessable(reason, e.to_string())
    }
}

impl From<TrainError> for ApiError {
    fn from(e: TrainError) -> Self {
        ApiError::unprocessable(train_reason(&e), e.to_string())
    }
}

impl From<GameError> for ApiError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::WrongMode { .. } => ApiError::conflict(e.reason(), e.to_string()),
            _ => ApiError::unprocessable(e.reason(), e.to_string()),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::internal(e.to_string())
    }
}

pub fn train_reason(e: &TrainError) -> &'static str {
    match e {
        TrainError::Config(_) => "invalid_config",
        TrainError::Diverged { .. } => "diverged",
        TrainError::Cancelled { .. } => "cancelled",
        TrainError::Model(_) => "model_error",
    }
}

/// Parses a JSON request body, reporting failures in the API's error shape.
pub fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        if e.is_data() {
            ApiError::unprocessable("invalid_request", e.to_string())
        } else {
            ApiError::bad_request("invalid_json", e.to_string())
        }
    })
}
