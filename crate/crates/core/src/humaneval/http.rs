//! JSON API over a [`HumanEvalStore`].
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/sessions` | `SessionConfig` | `{session_id, items, raters, expected_ratings}` |
//! | GET | `/sessions/{id}/next?rater=R` | | `NextItem` |
//! | POST | `/sessions/{id}/ratings` | `RatingSubmission` | `{ok, item_id, rater_id, progress}` |
//! | GET | `/sessions/{id}/progress?rater=R` | | `Progress` |
//! | GET | `/sessions/{id}/aggregate` | | `AggregateReport` |
//!
//! Errors come back as `{error, message}` with 400 for invalid input and 404
//! for unknown sessions, raters and items. Only the aggregate endpoint names
//! systems; it is meant for the experimenter, not for raters.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use super::{AggregateReport, HumanEvalError, HumanEvalStore, NextItem, Progress, RatingSubmission, SessionConfig};

impl IntoResponse for HumanEvalError {
    fn into_response(self) -> Response {
        let status = match self {
            Self::UnknownSession(_) | Self::UnknownRater(_) | Self::UnknownItem(_) => StatusCode::NOT_FOUND,
            Self::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, Json(json!({"error": self.kind(), "message": self.to_string()}))).into_response()
    }
}

#[derive(Deserialize)]
struct RaterQuery {
    rater: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub items: usize,
    pub raters: usize,
    pub expected_ratings: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
    pub item_id: String,
    pub rater_id: String,
    pub progress: Progress,
}

type AppState = Arc<HumanEvalStore>;

async fn create(State(store): State<AppState>, Json(cfg): Json<SessionConfig>) -> Result<(StatusCode, Json<Created>), HumanEvalError> {
    let h = store.create(&cfg)?;
    let items = h.session.items.len();
    let raters = h.session.orders.len();
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: h.session.id.clone(),
            items,
            raters,
            expected_ratings: items * raters,
        }),
    ))
}

async fn next(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RaterQuery>,
) -> Result<Json<NextItem>, HumanEvalError> {
    Ok(Json(store.get(&id)?.next_item(&q.rater)?))
}

async fn progress(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RaterQuery>,
) -> Result<Json<Progress>, HumanEvalError> {
    Ok(Json(store.get(&id)?.progress(&q.rater)?))
}

async fn rate(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Json(sub): Json<RatingSubmission>,
) -> Result<Json<Ack>, HumanEvalError> {
    let h = store.get(&id)?;
    // The log append syncs to disk; keep it off the async workers.
    let (rec, progress) = tokio::task::spawn_blocking(move || {
        let rec = h.submit(&sub)?;
        let p = h.progress(&rec.rater_id)?;
        Ok::<_, HumanEvalError>((rec, p))
    })
    .await
    .map_err(|e| HumanEvalError::Storage(e.to_string()))??;
    Ok(Json(Ack {
        ok: true,
        item_id: rec.item_id,
        rater_id: rec.rater_id,
        progress,
    }))
}

async fn aggregate(State(store): State<AppState>, Path(id): Path<String>) -> Result<Json<AggregateReport>, HumanEvalError> {
    Ok(Json(store.get(&id)?.aggregate()))
}

/// API routes, plus the rater UI bundle from `static_dir` for every other path.
pub fn router(store: Arc<HumanEvalStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/ratings", post(rate))
        .route("/sessions/{id}/progress", get(progress))
        .route("/sessions/{id}/aggregate", get(aggregate))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(store: Arc<HumanEvalStore>, static_dir: Option<PathBuf>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store, static_dir)).await
}
