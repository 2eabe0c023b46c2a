use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{sha256_hex, GenError, GenerationRequest};

/// Bearer token for the remote completions endpoint.
pub const API_KEY_ENV: &str = "ARTQA_API_KEY";
/// Base URL of the remote completions endpoint.
pub const API_BASE_ENV: &str = "ARTQA_API_BASE";

const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

/// Raw backend output. Token counts are optional because not every backend
/// reports usage.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl Completion {
    fn text(text: impl Into<String>) -> Self {
        Completion { text: text.into(), prompt_tokens: None, completion_tokens: None }
    }
}

/// Something that turns a prompt into text.
///
/// Implementations must be callable from several threads at once and count
/// every call to [`complete`](Self::complete).
pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &str;

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, GenError>;

    /// Number of `complete` calls made so far.
    fn calls(&self) -> u64;
}

/// Returns the prompt text unchanged.
#[derive(Debug, Default)]
pub struct EchoBackend {
    calls: AtomicU64,
}

impl EchoBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

impl GenerationBackend for EchoBackend {
    fn id(&self) -> &str {
        "echo"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, GenError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(Completion::text(request.prompt_text()))
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureFile {
    entries: Vec<FixtureEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FixtureEntry {
    prompt: String,
    text: String,
}

/// Canned generations keyed by the SHA-256 of the full prompt text.
///
/// Fixture files are JSON: `{"entries": [{"prompt": "...", "text": "..."}]}`.
#[derive(Debug, Default)]
pub struct FixtureBackend {
    texts: BTreeMap<String, String>,
    calls: AtomicU64,
}

impl FixtureBackend {
    pub fn from_pairs<P: Into<String>, T: Into<String>>(pairs: impl IntoIterator<Item = (P, T)>) -> Self {
        let mut backend = FixtureBackend::default();
        for (prompt, text) in pairs {
            backend.insert(&prompt.into(), text.into());
        }
        backend
    }

    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let file: FixtureFile = serde_json::from_str(&raw).map_err(std::io::Error::other)?;
        Ok(Self::from_pairs(file.entries.into_iter().map(|e| (e.prompt, e.text))))
    }

    pub fn insert(&mut self, prompt: &str, text: String) {
        self.texts.insert(sha256_hex(prompt.as_bytes()), text);
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

impl GenerationBackend for FixtureBackend {
    fn id(&self) -> &str {
        "fixture"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, GenError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let key = sha256_hex(request.prompt_text().as_bytes());
        self.texts
            .get(&key)
            .map(Completion::text)
            .ok_or_else(|| GenError::unavailable(format!("no fixture for key {key}")))
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    prompt: String,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

/// Client for an OpenAI-compatible `POST {base}/completions` endpoint.
///
/// Transport failures and 5xx responses are retried with exponential
/// backoff; 4xx responses are returned as [`GenError::BackendRefused`].
#[derive(Debug)]
pub struct RemoteBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    max_retries: u32,
    backoff: Duration,
    calls: AtomicU64,
}

impl RemoteBackend {
    pub fn new(base_url: &str, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        RemoteBackend {
            endpoint: format!("{}/completions", base_url.trim_end_matches('/')),
            api_key,
            agent,
            max_retries: 2,
            backoff: Duration::from_millis(500),
            calls: AtomicU64::new(0),
        }
    }

    /// Base URL from `ARTQA_API_BASE` (default OpenAI), key from
    /// `ARTQA_API_KEY`.
    pub fn from_env() -> Self {
        let base = std::env::var(API_BASE_ENV).unwrap_or_else(|_| DEFAULT_API_BASE.to_owned());
        Self::new(&base, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, request: &GenerationRequest) -> Result<Completion, GenError> {
        let body = CompletionBody {
            model: &request.decoding.model_name,
            prompt: request.prompt_text(),
            max_tokens: request.decoding.max_tokens,
            temperature: request.decoding.temperature,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| GenError::BackendUnavailable {
            message: e.to_string(),
            retryable: true,
            retry_after_secs: None,
            attempts: 1,
        })?;

        let status = resp.status().as_u16();
        if status >= 500 {
            let retry_after_secs =
                resp.headers().get("retry-after").and_then(|v| v.to_str().ok()).and_then(|v| v.trim().parse().ok());
            return Err(GenError::BackendUnavailable {
                message: format!("HTTP status {status}"),
                retryable: true,
                retry_after_secs,
                attempts: 1,
            });
        }
        if status >= 400 {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(GenError::BackendRefused { status, message });
        }
        let parsed: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| GenError::unavailable(format!("malformed completion response: {e}")))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GenError::unavailable("completion response has no choices"))?
            .text;
        let usage = parsed.usage.unwrap_or(Usage { prompt_tokens: None, completion_tokens: None });
        Ok(Completion { text, prompt_tokens: usage.prompt_tokens, completion_tokens: usage.completion_tokens })
    }
}

impl GenerationBackend for RemoteBackend {
    fn id(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, GenError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(request) {
                Err(GenError::BackendUnavailable { message, retryable: true, retry_after_secs, .. }) => {
                    if attempts > self.max_retries {
                        return Err(GenError::BackendUnavailable {
                            message,
                            retryable: true,
                            retry_after_secs,
                            attempts,
                        });
                    }
                    let wait =
                        retry_after_secs.map(Duration::from_secs).unwrap_or(self.backoff * 2u32.pow(attempts - 1));
                    log::warn!("remote backend unavailable ({message}); retrying in {wait:?}");
                    std::thread::sleep(wait);
                }
                other => return other,
            }
        }
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textgen::{DecodingParams, PromptTemplateKind};

    fn req(prompt: &str) -> GenerationRequest {
        GenerationRequest::new(prompt.into(), DecodingParams::for_mode(PromptTemplateKind::General), "fixture").unwrap()
    }

    #[test]
    fn fixture_lookup_is_verbatim() {
        let backend =
            FixtureBackend::from_pairs([("Describe and Contextualize the painting X", "  X is a painting.\n")]);
        let out = backend.complete(&req("Describe and Contextualize the painting X")).unwrap();
        assert_eq!(out.text, "  X is a painting.\n");
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn fixture_miss_is_unavailable() {
        let backend = FixtureBackend::default();
        match backend.complete(&req("unknown")) {
            Err(GenError::BackendUnavailable { message, .. }) => assert!(message.contains("no fixture for key")),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn fixture_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.json");
        std::fs::write(&path, r#"{"entries": [{"prompt": "p", "text": "t"}]}"#).unwrap();
        let backend = FixtureBackend::from_file(&path).unwrap();
        assert_eq!(backend.len(), 1);
        assert_eq!(backend.complete(&req("p")).unwrap().text, "t");
    }

    #[test]
    fn remote_endpoint_joins_base() {
        assert_eq!(RemoteBackend::new("http://h:1/v1/", None).endpoint(), "http://h:1/v1/completions");
    }

    #[test]
    fn unreachable_remote_reports_attempts() {
        // port 9 (discard) on localhost is closed in the sandbox
        let backend = RemoteBackend::new("http://127.0.0.1:9", None).with_retries(1, Duration::from_millis(1));
        match backend.complete(&req("p")) {
            Err(GenError::BackendUnavailable { attempts, retryable, .. }) => {
                assert_eq!(attempts, 2);
                assert!(retryable);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
