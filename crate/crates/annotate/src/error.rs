use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("item index {index} out of range (session has {len} items)")]
    Range { index: usize, len: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("session is {0}; answers can no longer change")]
    State(&'static str),

    #[error("session incomplete: {} items unanswered", missing.len())]
    Incomplete { missing: Vec<usize> },

    #[error("corrupt event log {path}: {message}")]
    Log { path: PathBuf, message: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] vsc_core::Error),
}

impl AnnotateError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AnnotateError::Io { path: path.into(), source }
    }

    fn status(&self) -> StatusCode {
        match self {
            AnnotateError::UnknownSession(_) | AnnotateError::NotFound(_) => StatusCode::NOT_FOUND,
            AnnotateError::Range { .. } => StatusCode::BAD_REQUEST,
            AnnotateError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            AnnotateError::State(_) | AnnotateError::Incomplete { .. } => StatusCode::CONFLICT,
            AnnotateError::Core(e) if e.is_config() => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            AnnotateError::UnknownSession(_) | AnnotateError::NotFound(_) => "not_found",
            AnnotateError::Range { .. } => "range",
            AnnotateError::Validation(_) => "validation",
            AnnotateError::State(_) => "state",
            AnnotateError::Incomplete { .. } => "incomplete",
            AnnotateError::Core(e) if e.is_config() => "validation",
            _ => "internal",
        }
    }
}

impl IntoResponse for AnnotateError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let mut body = json!({ "error": self.kind(), "message": self.to_string() });
        if let AnnotateError::Incomplete { missing } = &self {
            body["missing"] = json!(missing);
        }
        (status, Json(body)).into_response()
    }
}

pub type Result<T, E = AnnotateError> = std::result::Result<T, E>;
