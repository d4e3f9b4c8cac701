use std::future::Future;
use std::io;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use shapeattn::dataset::{ImageManifest, SketchRecord};
use tokio::net::TcpListener;

use crate::service::{AssignError, CaptureService, Submission, SubmitError};

#[derive(Clone)]
pub struct AppState {
    service: Arc<Mutex<CaptureService>>,
    manifest: Arc<ImageManifest>,
}

impl AppState {
    pub fn new(service: CaptureService, manifest: Arc<ImageManifest>) -> Self {
        Self {
            service: Arc::new(Mutex::new(service)),
            manifest,
        }
    }

    pub fn service(&self) -> MutexGuard<'_, CaptureService> {
        self.service.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Body of every non-image response other than a task or stats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusBody {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

fn status(
    code: StatusCode,
    status: &str,
    reason: Option<&str>,
    detail: Option<String>,
) -> Response {
    let body = StatusBody {
        status: status.to_owned(),
        reason: reason.map(str::to_owned),
        detail,
    };
    (code, Json(body)).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/task", get(get_task))
        .route("/api/submission/{task_id}", post(post_submission))
        .route("/api/stats", get(get_stats))
        .route("/images/{image_id}", get(get_image))
        .with_state(state)
}

/// Serves `state` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

#[derive(Debug, Deserialize)]
struct TaskQuery {
    drawer_id: Option<String>,
}

async fn get_task(State(state): State<AppState>, Query(q): Query<TaskQuery>) -> Response {
    let mut resp = match q.drawer_id.filter(|d| !d.trim().is_empty()) {
        None => status(
            StatusCode::BAD_REQUEST,
            "error",
            Some("missing drawer_id"),
            None,
        ),
        Some(drawer) => match state.service().assign(&drawer) {
            Ok(task) => Json(task).into_response(),
            Err(e @ AssignError::CollectionComplete) => {
                status(StatusCode::GONE, "complete", Some(&e.to_string()), None)
            }
            Err(e @ AssignError::NoEligibleTask) => status(
                StatusCode::NOT_FOUND,
                "unavailable",
                Some(&e.to_string()),
                None,
            ),
        },
    };
    resp.headers_mut()
        .insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    resp
}

async fn post_submission(
    State(state): State<AppState>,
    UrlPath(task_id): UrlPath<String>,
    body: Bytes,
) -> Response {
    let record = match std::str::from_utf8(&body)
        .map_err(|e| e.to_string())
        .and_then(|s| SketchRecord::parse_line(s).map_err(|e| e.to_string()))
    {
        Ok(r) => r,
        Err(detail) => {
            return status(
                StatusCode::BAD_REQUEST,
                "rejected",
                Some("malformed"),
                Some(detail),
            )
        }
    };
    // Appending syncs the store file, so keep it off the async workers.
    let outcome =
        tokio::task::spawn_blocking(move || state.service().submit(&task_id, record)).await;
    match outcome {
        Ok(Ok(Submission::Accepted { .. })) => status(StatusCode::OK, "accepted", None, None),
        Ok(Ok(Submission::Rejected(reason))) => status(
            StatusCode::UNPROCESSABLE_ENTITY,
            "rejected",
            Some(reason.code()),
            Some(reason.to_string()),
        ),
        Ok(Err(e)) => {
            let (code, reason) = match &e {
                SubmitError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown task"),
                SubmitError::Expired(_) => (StatusCode::GONE, "expired"),
                SubmitError::Duplicate(_) => (StatusCode::CONFLICT, "duplicate"),
                SubmitError::CellFull(_) => (StatusCode::CONFLICT, "cell full"),
                SubmitError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage"),
            };
            status(code, "error", Some(reason), Some(e.to_string()))
        }
        Err(join) => status(
            StatusCode::INTERNAL_SERVER_ERROR,
            "error",
            Some("internal"),
            Some(join.to_string()),
        ),
    }
}

async fn get_stats(State(state): State<AppState>) -> Response {
    let summary = state.service().summary();
    Json(summary).into_response()
}

fn content_type(path: &Path) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn get_image(State(state): State<AppState>, UrlPath(image_id): UrlPath<String>) -> Response {
    let not_found = || status(StatusCode::NOT_FOUND, "error", Some("unknown image"), None);
    let Some(entry) = state.manifest.get(&image_id) else {
        return not_found();
    };
    let path = state.manifest.resolve_path(entry);
    match tokio::fs::read(&path).await {
        Ok(bytes) => (
            [
                (header::CONTENT_TYPE, content_type(&path)),
                (header::CACHE_CONTROL, "private, max-age=3600"),
            ],
            bytes,
        )
            .into_response(),
        Err(e) => {
            log::warn!("image {image_id} at {}: {e}", path.display());
            not_found()
        }
    }
}
