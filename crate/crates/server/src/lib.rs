//! HTTP annotation service wrapping one active learning loop.
//!
//! `POST /api/session` opens (or returns) the session, `GET .../batch` hands
//! out the pending batch, `POST .../labels` retrains, and `GET .../status` /
//! `GET .../export` read the last persisted snapshot without blocking
//! writers.

pub mod api;
pub mod config;
pub mod state;
mod ui;

use std::collections::{BTreeMap, BTreeSet};
use std::convert::Infallible;
use std::sync::Arc;

use al_core::corpus::{write_assignments_csv, write_assignments_jsonl, LabelSet};
use al_core::Error;
use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::{ServeDir, ServeFile};

pub use api::*;
pub use config::AppConfig;
pub use state::{AppState, Session};

use state::{batch_docs, current_stopping, persist, SessionInner};

type ApiResult<T> = Result<T, ApiError>;

/// Builds the service router over `state`.
pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}/batch", get(next_batch))
        .route("/api/session/{id}/labels", post(submit_labels))
        .route("/api/session/{id}/status", get(status))
        .route("/api/session/{id}/export", get(export))
        .route("/api/{*rest}", get(api_not_found).post(api_not_found));
    let ui_dir = state.ui_dir.clone().filter(|d| d.join("index.html").exists());
    let router = api.with_state(state);
    match ui_dir {
        Some(dir) => {
            let index = dir.join("index.html");
            router.fallback_service(ServeDir::new(dir).not_found_service(ServeFile::new(index)))
        }
        None => router.route("/", get(ui::fallback_page)),
    }
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

fn lookup(state: &AppState, id: &str) -> ApiResult<Arc<Session>> {
    state
        .session(id)
        .ok_or_else(|| ApiError::not_found(&format!("session {id}")))
}

/// Runs `f` on the blocking pool while holding the session's mutation lock.
async fn with_session<T, F>(session: Arc<Session>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Session, &mut SessionInner) -> ApiResult<T> + Send + 'static,
{
    let guard = session.inner.clone().lock_owned().await;
    tokio::task::spawn_blocking(move || {
        let mut guard = guard;
        f(&session, &mut guard)
    })
    .await
    .map_err(ApiError::internal)?
}

async fn create_session(State(state): State<Arc<AppState>>) -> ApiResult<Json<SessionCreated>> {
    let session = state.get_or_create().await.map_err(|e| match e {
        Error::EmptySeedSet => ApiError::unprocessable("corpus has no labeled seed rows", json!(null)),
        other => ApiError::from(other),
    })?;
    let status = session.snapshot().status.clone();
    Ok(Json(SessionCreated {
        session_id: session.id.clone(),
        classes: status.classes,
        mode: status.mode,
    }))
}

async fn next_batch(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<BatchView>> {
    let session = lookup(&state, &id)?;
    if let Some(pending) = &session.snapshot().pending {
        return Ok(Json(pending.clone()));
    }
    let view = with_session(session, |session, inner| {
        if !inner.learner.pending().is_empty() {
            return Ok(BatchView {
                batch: batch_docs(inner.learner.dataset(), inner.learner.pending()),
                seq: inner.meta.seq,
                done: false,
            });
        }
        match inner.learner.query() {
            Ok(ids) => {
                inner.meta.seq += 1;
                persist(&session.dir, inner)?;
                session.publish(inner);
                Ok(BatchView {
                    batch: batch_docs(inner.learner.dataset(), &ids),
                    seq: inner.meta.seq,
                    done: false,
                })
            }
            Err(Error::PoolExhausted) => Ok(BatchView {
                batch: Vec::new(),
                seq: inner.meta.seq,
                done: true,
            }),
            Err(e) => Err(e.into()),
        }
    })
    .await?;
    Ok(Json(view))
}

async fn submit_labels(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<LabelSubmission>, JsonRejection>,
) -> ApiResult<Json<SubmitResponse>> {
    let session = lookup(&state, &id)?;
    let Json(body) = body.map_err(|e| ApiError::new(e.status(), "malformed request body", json!(e.body_text())))?;
    let response = with_session(session, move |session, inner| {
        let pending = inner.learner.pending();
        if pending.is_empty() {
            return Err(ApiError::conflict("no pending batch", json!({ "seq": inner.meta.seq })));
        }
        if body.seq != inner.meta.seq {
            return Err(ApiError::conflict(
                "stale seq",
                json!({ "expected": inner.meta.seq, "got": body.seq }),
            ));
        }
        let mut ids = BTreeMap::new();
        for (key, names) in &body.labels {
            let doc: usize = key
                .trim()
                .parse()
                .map_err(|_| ApiError::unprocessable("invalid doc id", json!(key)))?;
            ids.insert(doc, names);
        }
        let want: BTreeSet<usize> = pending.iter().copied().collect();
        let missing: Vec<usize> = want.iter().filter(|i| !ids.contains_key(i)).copied().collect();
        let extra: Vec<usize> = ids.keys().filter(|i| !want.contains(i)).copied().collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(ApiError::conflict(
                "labels must cover exactly the pending batch",
                json!({ "missing": missing, "extra": extra }),
            ));
        }
        let space = inner.learner.dataset().label_space();
        let mut labels: BTreeMap<usize, LabelSet> = BTreeMap::new();
        for (doc, names) in ids {
            let set = space
                .label_set_from_names(names)
                .and_then(|set| space.validate(&set).map(|_| set))
                .map_err(|e| ApiError::unprocessable("invalid label", json!({ "doc_id": doc, "message": e.to_string() })))?;
            labels.insert(doc, set);
        }
        let record = inner.learner.update(&labels)?;
        let (kappa, change_rate, retrain_ms) = (record.kappa, record.change_rate, record.wall_clock_ms);
        persist(&session.dir, inner)?;
        session.publish(inner);
        let l = &inner.learner;
        Ok(SubmitResponse {
            labeled: l.pools().labeled().len(),
            unlabeled: l.pools().unlabeled().len(),
            round: l.round(),
            stopping: current_stopping(l),
            kappa,
            change_rate,
            retrain_ms,
        })
    })
    .await?;
    Ok(Json(response))
}

async fn status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<StatusView>> {
    let session = lookup(&state, &id)?;
    Ok(Json(session.snapshot().status.clone()))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    format: Option<String>,
}

/// Rows per streamed body chunk.
const EXPORT_CHUNK: usize = 512;

async fn export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let session = lookup(&state, &id)?;
    let format = q.format.as_deref().unwrap_or("csv").to_ascii_lowercase();
    let (content_type, csv) = match format.as_str() {
        "csv" => ("text/csv; charset=utf-8", true),
        "jsonl" => ("application/x-ndjson; charset=utf-8", false),
        other => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "unsupported export format",
                json!(other),
            ))
        }
    };
    let labels = session.snapshot().labels.clone();
    let dataset = state.dataset.clone();
    let rows: Vec<(usize, LabelSet)> = labels.iter().map(|(&i, l)| (i, l.clone())).collect();
    let mut chunks: Vec<Result<Vec<u8>, Infallible>> = Vec::new();
    for (n, part) in rows.chunks(EXPORT_CHUNK.max(1)).enumerate() {
        let mut buf = Vec::new();
        let result = if csv {
            write_assignments_csv(&mut buf, dataset.label_space(), part.iter().map(|(i, l)| (*i, l)))
        } else {
            write_assignments_jsonl(&mut buf, &dataset, part.iter().map(|(i, l)| (*i, l)))
        };
        result.map_err(ApiError::internal)?;
        if csv && n > 0 {
            // Only the first chunk keeps the header line.
            let start = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |p| p + 1);
            buf.drain(..start);
        }
        chunks.push(Ok(buf));
    }
    if csv && chunks.is_empty() {
        let mut buf = Vec::new();
        write_assignments_csv(&mut buf, dataset.label_space(), std::iter::empty()).map_err(ApiError::internal)?;
        chunks.push(Ok(buf));
    }
    let body = Body::from_stream(futures_util::stream::iter(chunks));
    let filename = format!("labels-{}.{}", session.id, if csv { "csv" } else { "jsonl" });
    Ok((
        [
            (header::CONTENT_TYPE, content_type.to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{filename}\"")),
        ],
        body,
    )
        .into_response())
}
