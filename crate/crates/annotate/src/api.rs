//! HTTP routes.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::error::{AnnotateError, Result};
use crate::store::{Finalized, ItemView, SessionView, Store};

/// Default shuffle seed when a create request names none.
pub const DEFAULT_SESSION_SEED: u64 = 0;

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub expert_id: String,
    pub test_fold: Option<u8>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub struct AnswerRequest {
    pub index: usize,
    pub category: String,
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/items/:index", get(get_item))
        .route("/sessions/:id/answers", post(submit_answer))
        .route("/sessions/:id/finalize", post(finalize))
        .route("/images/:config_hash/:name", get(image))
        .with_state(store)
}

async fn create_session(State(store): State<Arc<Store>>, Json(req): Json<CreateRequest>) -> Result<(StatusCode, Json<SessionView>)> {
    let view = store.create(&req.expert_id, req.test_fold, req.seed.unwrap_or(DEFAULT_SESSION_SEED))?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<SessionView>> {
    Ok(Json(store.session(&id)?))
}

async fn get_item(State(store): State<Arc<Store>>, Path((id, index)): Path<(String, usize)>) -> Result<Json<ItemView>> {
    Ok(Json(store.item(&id, index)?))
}

async fn submit_answer(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Json(req): Json<AnswerRequest>,
) -> Result<Json<serde_json::Value>> {
    let progress = store.answer(&id, req.index, &req.category)?;
    Ok(Json(json!({ "progress": progress })))
}

async fn finalize(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Json<Finalized>> {
    Ok(Json(store.finalize(&id)?))
}

async fn image(State(store): State<Arc<Store>>, Path((config_hash, name)): Path<(String, String)>) -> Result<Response> {
    let path = store
        .study()
        .resolve_image(&config_hash, &name)
        .ok_or_else(|| AnnotateError::NotFound(format!("image {config_hash}/{name}")))?;
    let bytes = match tokio::fs::read(&path).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            tracing::warn!(path = %path.display(), "study image missing on disk");
            return Err(AnnotateError::NotFound(format!("image {config_hash}/{name}")));
        }
        Err(e) => return Err(AnnotateError::io(path, e)),
    };
    let etag = format!("\"{}\"", name.trim_end_matches(".png"));
    Ok((
        [
            (header::CONTENT_TYPE, "image/png".to_string()),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable".to_string()),
            (header::ETAG, etag),
        ],
        bytes,
    )
        .into_response())
}

/// Binds `addr` and serves until `shutdown` resolves. Session logs are
/// synced on every write, so shutdown needs no flush step.
pub async fn serve(store: Arc<Store>, addr: SocketAddr, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AnnotateError::Io { path: addr.to_string().into(), source: e })?;
    tracing::info!(addr = %listener.local_addr().map_or(addr, |a| a), "annotation server listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| AnnotateError::Io { path: addr.to_string().into(), source: e })
}
