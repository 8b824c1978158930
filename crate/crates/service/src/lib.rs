//! HTTP front end for a [`TaskStore`].
//!
//! - `GET /hits/next?worker_id=W`: next HIT for the worker, `204` when none remain
//! - `POST /answers`: `{status}`; `409` for a repeated or surplus answer, `422` for invalid selections
//! - `GET /progress`: `{hits_total, hits_complete, answers}`

use std::future::Future;
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use opinionkb::crowd::{Progress, SubmitError, TaskStore, WorkerAnswer};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;

pub type SharedStore = Arc<Mutex<TaskStore>>;

pub fn shared(store: TaskStore) -> SharedStore {
    Arc::new(Mutex::new(store))
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    worker_id: String,
}

async fn next_hit(State(store): State<SharedStore>, Query(q): Query<NextQuery>) -> Response {
    if q.worker_id.trim().is_empty() {
        return (StatusCode::BAD_REQUEST, Json(json!({"status": "rejected", "error": "empty worker_id"}))).into_response();
    }
    let store = store.lock().expect("task store lock");
    match store.next_for(&q.worker_id) {
        Some(hit) => Json(hit).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn submit(State(store): State<SharedStore>, Json(answer): Json<WorkerAnswer>) -> Response {
    let result = store.lock().expect("task store lock").submit(answer);
    match result {
        Ok(()) => Json(json!({"status": "accepted"})).into_response(),
        Err(SubmitError::Conflict(m)) => {
            (StatusCode::CONFLICT, Json(json!({"status": "conflict", "error": m}))).into_response()
        }
        Err(SubmitError::Invalid(m)) => {
            (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({"status": "rejected", "error": m}))).into_response()
        }
        Err(SubmitError::Storage(e)) => {
            log::error!("answer log write failed: {e}");
            (
                StatusCode::INTERNAL_SERVER_ERROR,
                Json(json!({"status": "error", "error": e.to_string()})),
            )
                .into_response()
        }
    }
}

async fn progress(State(store): State<SharedStore>) -> Json<Progress> {
    Json(store.lock().expect("task store lock").progress())
}

pub fn router(store: SharedStore) -> Router {
    Router::new()
        .route("/hits/next", get(next_hit))
        .route("/answers", post(submit))
        .route("/progress", get(progress))
        .with_state(store)
}

/// Serves until `shutdown` resolves.
pub async fn serve(listener: TcpListener, store: SharedStore, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("task service listening on http://{addr}");
    }
    axum::serve(listener, router(store)).with_graceful_shutdown(shutdown).await
}
