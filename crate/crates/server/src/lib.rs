//! JSON API over the describe/ask pipeline.
//!
//! | route | body | response |
//! |---|---|---|
//! | `GET /health` | | `{"status": "ok"}` |
//! | `GET /artworks` | | `[{"id", "title", "question_count"}]` |
//! | `POST /ask` | `{"artwork_id", "question", "mode", "qa_backend"}` | [`AskResponse`] |
//! | `POST /describe` | `{"artwork_id", "mode", "question"?}` | `{"context", "cached"}` |
//!
//! Errors are `{"error": {"code", "message"}}`.

mod error;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};
use tower_http::timeout::TimeoutLayer;

use artqa::corpus::Corpus;
use artqa::metrics::IdfTable;
use artqa::pipeline::{self, reference_idf, Generator};
use artqa::qa::{QaBackendKind, QaEngine, RemoteQa};
use artqa::textgen::{Cache, GenerationBackend};
use artqa::PipelineMode;

pub use error::ApiError;

/// Bind address override.
pub const BIND_ENV: &str = "ARTQA_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

/// Shared, read-only server state. The cache is the only thing requests
/// write to.
#[derive(Clone)]
pub struct AppState {
    corpus: Option<Arc<Corpus>>,
    idf: Option<Arc<IdfTable>>,
    backend: Arc<dyn GenerationBackend>,
    cache: Option<Cache>,
    remote_qa: Option<RemoteQa>,
}

impl AppState {
    pub fn new(backend: Arc<dyn GenerationBackend>) -> Self {
        AppState { corpus: None, idf: None, backend, cache: None, remote_qa: None }
    }

    /// Loads `corpus` and the IDF table the lexical extractor uses.
    pub fn with_corpus(mut self, corpus: Corpus) -> Self {
        match reference_idf(corpus.test_records()) {
            Ok(idf) => self.idf = Some(Arc::new(idf)),
            Err(e) => log::warn!("no IDF statistics for the corpus: {e}"),
        }
        self.corpus = Some(Arc::new(corpus));
        self
    }

    pub fn with_cache(mut self, cache: Cache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_remote_qa(mut self, qa: RemoteQa) -> Self {
        self.remote_qa = Some(qa);
        self
    }

    fn corpus(&self) -> Result<Arc<Corpus>, ApiError> {
        self.corpus.clone().ok_or_else(ApiError::no_corpus)
    }

    fn engine(&self, kind: QaBackendKind) -> Result<QaEngine, ApiError> {
        match kind {
            QaBackendKind::Lexical => Ok(QaEngine::Lexical),
            QaBackendKind::Remote => self.remote_qa.clone().map(QaEngine::Remote).ok_or_else(|| {
                ApiError::new(StatusCode::BAD_GATEWAY, "qa_unavailable", "no remote QA service is configured")
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Allowed CORS origins; empty allows any origin.
    pub cors_origins: Vec<String>,
    pub request_timeout: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { cors_origins: Vec::new(), request_timeout: Duration::from_secs(30) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtworkSummary {
    pub id: String,
    pub title: String,
    pub question_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AskRequest {
    pub artwork_id: String,
    pub question: String,
    #[serde(default)]
    pub mode: PipelineMode,
    #[serde(default)]
    pub qa_backend: QaBackendKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub answer: String,
    /// Char offsets of `answer` in `context`.
    pub span: (usize, usize),
    pub context: String,
    pub mode: PipelineMode,
    pub cached: bool,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescribeRequest {
    pub artwork_id: String,
    #[serde(default)]
    pub mode: PipelineMode,
    #[serde(default)]
    pub question: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescribeResponse {
    pub context: String,
    pub cached: bool,
}

pub fn router(state: AppState, config: &ServerConfig) -> Router {
    let cors = if config.cors_origins.is_empty() {
        CorsLayer::new().allow_origin(Any)
    } else {
        let origins: Vec<HeaderValue> = config.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
        CorsLayer::new().allow_origin(origins)
    }
    .allow_methods(Any)
    .allow_headers(Any);

    Router::new()
        .route("/health", get(health))
        .route("/artworks", get(artworks))
        .route("/ask", post(ask))
        .route("/describe", post(describe))
        .fallback(|| async { ApiError::not_found("no such route") })
        .layer(TimeoutLayer::with_status_code(StatusCode::GATEWAY_TIMEOUT, config.request_timeout))
        .layer(cors)
        .with_state(state)
}

/// Serves `app` on `addr` until ctrl-c.
pub async fn serve(addr: SocketAddr, app: Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn artworks(State(state): State<AppState>) -> Result<Json<Vec<ArtworkSummary>>, ApiError> {
    let corpus = state.corpus()?;
    Ok(Json(
        corpus
            .records()
            .iter()
            .map(|r| ArtworkSummary { id: r.id.clone(), title: r.title.clone(), question_count: r.questions.len() })
            .collect(),
    ))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn ask(
    State(state): State<AppState>,
    body: Result<Json<AskRequest>, JsonRejection>,
) -> Result<Json<AskResponse>, ApiError> {
    let Json(req) = body?;
    if req.question.trim().is_empty() {
        return Err(ApiError::validation("question must not be empty"));
    }
    let corpus = state.corpus()?;
    corpus.get(&req.artwork_id).map_err(|e| ApiError::not_found(e.to_string()))?;
    let engine = state.engine(req.qa_backend)?;
    let idf = state.idf.clone().ok_or_else(|| ApiError::internal("no IDF statistics loaded"))?;
    let started = Instant::now();
    let answer = blocking(move || {
        let generator = Generator::new(state.backend.as_ref(), state.cache.as_ref());
        pipeline::ask(&corpus, generator, &engine, &idf, &req.artwork_id, &req.question, req.mode)
            .map_err(ApiError::from)
    })
    .await?;
    Ok(Json(AskResponse {
        answer: answer.span.text,
        span: (answer.span.char_start, answer.span.char_end),
        context: answer.context,
        mode: answer.mode,
        cached: answer.cached,
        latency_ms: started.elapsed().as_millis() as u64,
    }))
}

async fn describe(
    State(state): State<AppState>,
    body: Result<Json<DescribeRequest>, JsonRejection>,
) -> Result<Json<DescribeResponse>, ApiError> {
    let Json(req) = body?;
    let corpus = state.corpus()?;
    corpus.get(&req.artwork_id).map_err(|e| ApiError::not_found(e.to_string()))?;
    if req.question.as_deref().is_some_and(|q| q.trim().is_empty()) {
        return Err(ApiError::validation("question must not be empty"));
    }
    let description = blocking(move || {
        let generator = Generator::new(state.backend.as_ref(), state.cache.as_ref());
        pipeline::describe(&corpus, generator, &req.artwork_id, req.mode, req.question.as_deref())
            .map_err(ApiError::from)
    })
    .await?;
    Ok(Json(DescribeResponse { context: description.context, cached: description.cached }))
}
