//! HTTP endpoints consumed by the review UI. The hidden source label of a
//! task never leaves this module.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{SecondsFormat, Utc};
use serde::Deserialize;
use serde_json::json;
use synthgov_core::review::{export_jsonl, Annotation, AnnotationStore, ReviewError};
use tower_http::services::ServeDir;

#[derive(Clone)]
pub struct ServiceState {
    store: Arc<Mutex<AnnotationStore>>,
    /// Accepted annotations are appended here; `None` keeps them in memory.
    annotations_file: Option<PathBuf>,
}

impl ServiceState {
    pub fn new(store: AnnotationStore, annotations_file: Option<PathBuf>) -> Self {
        Self {
            store: Arc::new(Mutex::new(store)),
            annotations_file,
        }
    }
}

pub fn router(state: ServiceState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/tasks", get(next_task))
        .route("/annotations", post(submit))
        .route("/annotations/export", get(export))
        .route("/agreement", get(agreement))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Deserialize)]
struct TaskQuery {
    annotator_id: String,
}

async fn next_task(State(state): State<ServiceState>, query: Result<Query<TaskQuery>, QueryRejection>) -> Response {
    let Ok(Query(q)) = query else {
        return error(StatusCode::BAD_REQUEST, "annotator_id is required");
    };
    if q.annotator_id.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "annotator_id is required");
    }
    let store = state.store.lock().expect("store lock");
    let task = store.next_task(&q.annotator_id);
    Json(json!({ "done": task.is_none(), "task": task })).into_response()
}

async fn submit(State(state): State<ServiceState>, body: Bytes) -> Response {
    let mut annotation: Annotation = match serde_json::from_slice(&body) {
        Ok(a) => a,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    if annotation.timestamp.is_empty() {
        annotation.timestamp = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
    }
    let mut store = state.store.lock().expect("store lock");
    match store.add(annotation.clone()) {
        Ok(()) => {}
        Err(e @ ReviewError::UnknownTask(_)) => return error(StatusCode::NOT_FOUND, e.to_string()),
        Err(e @ ReviewError::Duplicate { .. }) => return error(StatusCode::CONFLICT, e.to_string()),
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    }
    if let Some(path) = &state.annotations_file {
        let line = export_jsonl(std::slice::from_ref(&annotation));
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| f.write_all(line.as_bytes()));
        if let Err(e) = written {
            return error(StatusCode::INTERNAL_SERVER_ERROR, format!("annotation not persisted: {e}"));
        }
    }
    (StatusCode::CREATED, Json(annotation)).into_response()
}

/// Agreement only; accuracy would reveal the hidden sources to annotators.
async fn agreement(State(state): State<ServiceState>) -> Response {
    let store = state.store.lock().expect("store lock");
    match store.agreement() {
        Ok(mut stats) => {
            stats.accuracy = None;
            Json(json!({ "available": true, "stats": stats })).into_response()
        }
        Err(e) => Json(json!({ "available": false, "reason": e.to_string() })).into_response(),
    }
}

async fn export(State(state): State<ServiceState>) -> Response {
    let store = state.store.lock().expect("store lock");
    ([(header::CONTENT_TYPE, "application/x-ndjson")], export_jsonl(store.annotations())).into_response()
}

/// Bind and serve until the process is stopped.
pub fn serve(state: ServiceState, ui_dir: Option<PathBuf>, port: u16) -> std::io::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
        eprintln!("review service listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state, ui_dir)).await
    })
}
