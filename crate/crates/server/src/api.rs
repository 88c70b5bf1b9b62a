use std::collections::BTreeMap;

use al_core::corpus::LabelMode;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub classes: Vec<String>,
    pub mode: LabelMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchDoc {
    pub doc_id: usize,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchView {
    pub batch: Vec<BatchDoc>,
    pub seq: u64,
    pub done: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub seq: u64,
    /// Document id (as a JSON object key) to class names.
    pub labels: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingView {
    pub name: String,
    pub value: Option<f64>,
    pub should_stop: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub labeled: usize,
    pub unlabeled: usize,
    pub round: usize,
    pub stopping: StoppingView,
    pub kappa: Option<f64>,
    pub change_rate: Option<f64>,
    pub retrain_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusView {
    pub session_id: String,
    pub classes: Vec<String>,
    pub mode: LabelMode,
    pub strategy: String,
    pub classifier: String,
    pub round: usize,
    pub labeled: usize,
    pub unlabeled: usize,
    pub pending: usize,
    pub seq: u64,
    pub done: bool,
    pub stopping: StoppingView,
    pub kappa: Option<f64>,
    pub change_rate: Option<f64>,
    pub created_at_ms: u64,
    pub updated_at_ms: u64,
}

/// Error body `{error, detail}` with its HTTP status.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, error: impl Into<String>, detail: Value) -> Self {
        Self {
            status,
            error: error.into(),
            detail,
        }
    }

    pub fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not found", json!(what))
    }

    pub fn conflict(error: impl Into<String>, detail: Value) -> Self {
        Self::new(StatusCode::CONFLICT, error, detail)
    }

    pub fn unprocessable(error: impl Into<String>, detail: Value) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, error, detail)
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error", json!(e.to_string()))
    }
}

impl From<al_core::Error> for ApiError {
    fn from(e: al_core::Error) -> Self {
        use al_core::Error as E;
        match e {
            E::BatchMismatch { missing, extra } => Self::conflict(
                "labels must cover exactly the pending batch",
                json!({ "missing": missing, "extra": extra }),
            ),
            E::PendingBatch | E::NoPendingBatch => Self::conflict(e.to_string(), Value::Null),
            E::InvalidLabel(_) | E::UnknownClass(_) => Self::unprocessable("invalid label", json!(e.to_string())),
            other => Self::internal(other),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.error, "detail": self.detail }))).into_response()
    }
}
