//! Description generation: prompt templates, pluggable completion backends,
//! an on-disk result cache, and token cost estimates.

mod backend;
mod cache;
mod cost;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{
    Completion, EchoBackend, FixtureBackend, GenerationBackend, RemoteBackend, API_BASE_ENV, API_KEY_ENV,
};
pub use cache::{cached_generate, Cache, CacheError, CacheStats, CACHE_DIR_ENV};
pub use cost::{approx_token_count, cost_upper_bound, estimate_cost, CostError, ModelPrice, Pricing};

/// Model name sent to remote backends unless overridden.
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo-instruct";

/// The two prompt templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptTemplateKind {
    /// `Describe and Contextualize the painting <title>`
    #[default]
    General,
    /// `Painting <title> <question>`
    QuestionBased,
}

impl PromptTemplateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptTemplateKind::General => "general",
            PromptTemplateKind::QuestionBased => "question_based",
        }
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            PromptTemplateKind::General => "General",
            PromptTemplateKind::QuestionBased => "Question-based",
        }
    }
}

impl fmt::Display for PromptTemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptTemplateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(PromptTemplateKind::General),
            "question_based" => Ok(PromptTemplateKind::QuestionBased),
            other => Err(format!("unknown mode `{other}` (expected general or question_based)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("painting title is empty")]
    EmptyTitle,
    #[error("question_based prompts need a question")]
    MissingQuestion,
    #[error("general prompts take no question")]
    UnexpectedQuestion,
}

/// Renders one of the two templates. Title and question are inserted
/// verbatim, separated by single spaces.
pub fn render_prompt(
    kind: PromptTemplateKind,
    painting_title: &str,
    question: Option<&str>,
) -> Result<String, PromptError> {
    if painting_title.is_empty() {
        return Err(PromptError::EmptyTitle);
    }
    match (kind, question) {
        (PromptTemplateKind::General, None) => Ok(format!("Describe and Contextualize the painting {painting_title}")),
        (PromptTemplateKind::General, Some(_)) => Err(PromptError::UnexpectedQuestion),
        (PromptTemplateKind::QuestionBased, Some(q)) => Ok(format!("Painting {painting_title} {q}")),
        (PromptTemplateKind::QuestionBased, None) => Err(PromptError::MissingQuestion),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub model_name: String,
}

impl DecodingParams {
    /// Greedy decoding with room for a full description (general) or a
    /// couple of sentences (question based).
    pub fn for_mode(kind: PromptTemplateKind) -> Self {
        DecodingParams {
            max_tokens: match kind {
                PromptTemplateKind::General => 256,
                PromptTemplateKind::QuestionBased => 64,
            },
            temperature: 0.0,
            model_name: DEFAULT_MODEL.to_owned(),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.max_tokens == 0 {
            return Err(GenError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if !self.temperature.is_finite() || !(0.0..=2.0).contains(&self.temperature) {
            return Err(GenError::InvalidRequest(format!("temperature {} is outside [0, 2]", self.temperature)));
        }
        if self.model_name.trim().is_empty() {
            return Err(GenError::InvalidRequest("model name is empty".into()));
        }
        Ok(())
    }
}

/// A rendered prompt plus everything that determines the backend's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt_head: String,
    /// In-context `(input, output)` examples placed before the prompt head.
    #[serde(default)]
    pub context_examples: Vec<(String, String)>,
    pub decoding: DecodingParams,
    pub backend_id: String,
}

impl GenerationRequest {
    pub fn new(prompt_head: String, decoding: DecodingParams, backend_id: &str) -> Result<Self, GenError> {
        let req = GenerationRequest {
            prompt_head,
            context_examples: Vec::new(),
            decoding,
            backend_id: backend_id.to_owned(),
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.prompt_head.is_empty() {
            return Err(GenError::InvalidRequest("prompt is empty".into()));
        }
        self.decoding.validate()
    }

    /// The text sent to the model: each example as `input\noutput\n\n`,
    /// then the prompt head.
    pub fn prompt_text(&self) -> String {
        let mut out = String::new();
        for (input, output) in &self.context_examples {
            out.push_str(input);
            out.push('\n');
            out.push_str(output);
            out.push_str("\n\n");
        }
        out.push_str(&self.prompt_head);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub backend_id: String,
    pub cached: bool,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { message: String, retryable: bool, retry_after_secs: Option<u64>, attempts: u32 },
    #[error("backend refused the request (HTTP {status}): {message}")]
    BackendRefused { status: u16, message: String },
    #[error("backend `{backend_id}` returned an empty generation")]
    EmptyGeneration { backend_id: String },
    #[error("cannot write cache entry: {0}")]
    CacheWrite(String),
}

impl GenError {
    /// Stable machine-readable error class.
    pub fn class(&self) -> &'static str {
        match self {
            GenError::InvalidRequest(_) => "invalid_request",
            GenError::BackendUnavailable { .. } => "backend_unavailable",
            GenError::BackendRefused { .. } => "backend_refused",
            GenError::EmptyGeneration { .. } => "empty_generation",
            GenError::CacheWrite(_) => "cache_write",
        }
    }

    pub(crate) fn unavailable(message: impl Into<String>) -> Self {
        GenError::BackendUnavailable { message: message.into(), retryable: false, retry_after_secs: None, attempts: 1 }
    }
}

/// Calls the backend once. Token counts the backend does not report are
/// filled in with [`approx_token_count`].
pub fn generate(backend: &dyn GenerationBackend, request: &GenerationRequest) -> Result<GenerationResult, GenError> {
    request.validate()?;
    let completion = backend.complete(request)?;
    if completion.text.is_empty() {
        return Err(GenError::EmptyGeneration { backend_id: backend.id().to_owned() });
    }
    let prompt_tokens = completion.prompt_tokens.unwrap_or_else(|| approx_token_count(&request.prompt_text()));
    let completion_tokens = completion.completion_tokens.unwrap_or_else(|| approx_token_count(&completion.text));
    Ok(GenerationResult {
        text: completion.text,
        prompt_tokens,
        completion_tokens,
        backend_id: backend.id().to_owned(),
        cached: false,
        timestamp: Utc::now(),
    })
}

/// JSON with object keys sorted at every level.
pub(crate) fn canonical_json(value: &serde_json::Value) -> String {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> =
                keys.into_iter().map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&map[k]))).collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => {
            let body: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", body.join(","))
        }
        scalar => scalar.to_string(),
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 (64 hex chars) of the request's canonical JSON. Prompt bytes are
/// hashed as given.
pub fn cache_key(request: &GenerationRequest) -> String {
    let value = serde_json::to_value(request).expect("request serializes");
    sha256_hex(canonical_json(&value).as_bytes())
}
