use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use artqa::corpus::CorpusError;
use artqa::pipeline::PipelineError;
use artqa::qa::QaError;
use artqa::textgen::GenError;

/// An error response: `{"error": {"code", "message"}}` with an HTTP status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError { status, code: code.into(), message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn no_corpus() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "corpus_not_loaded", "no corpus is loaded")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        match rejection {
            JsonRejection::MissingJsonContentType(e) => {
                Self::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", e.body_text())
            }
            other => Self::validation(other.body_text()),
        }
    }
}

impl From<GenError> for ApiError {
    fn from(e: GenError) -> Self {
        let status = match &e {
            GenError::InvalidRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
            GenError::CacheWrite(_) => StatusCode::INTERNAL_SERVER_ERROR,
            GenError::BackendUnavailable { .. }
            | GenError::BackendRefused { .. }
            | GenError::EmptyGeneration { .. } => StatusCode::BAD_GATEWAY,
        };
        Self::new(status, e.class(), e.to_string())
    }
}

impl From<QaError> for ApiError {
    fn from(e: QaError) -> Self {
        let code = match &e {
            QaError::EmptyContext => "empty_context",
            QaError::RemoteQaUnavailable(_) => "qa_unavailable",
            QaError::SpanOutOfBounds { .. } => "qa_bad_span",
        };
        Self::new(StatusCode::BAD_GATEWAY, code, e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Corpus(CorpusError::UnknownArtwork(id)) => {
                Self::not_found(format!("unknown artwork `{id}`"))
            }
            PipelineError::Corpus(other) => Self::internal(other.to_string()),
            PipelineError::Prompt(p) => Self::validation(p.to_string()),
            PipelineError::Generation(g) => g.into(),
            PipelineError::Qa(q) => q.into(),
        }
    }
}
