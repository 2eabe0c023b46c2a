use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{slice_chars, split_sentences, AnswerSpan, QaError};

/// Environment variable holding the QA service base URL.
pub const QA_BASE_ENV: &str = "ARTQA_QA_BASE";

#[derive(Serialize)]
struct AnswerRequest<'a> {
    context: &'a str,
    question: &'a str,
}

#[derive(Deserialize)]
struct AnswerResponse {
    text: String,
    start: i64,
    end: i64,
    score: f64,
}

/// Client for an extractive-QA service.
///
/// Sends `POST {base}/answer` with `{"context", "question"}` and expects
/// `{"text", "start", "end", "score"}` back, offsets in chars.
#[derive(Debug, Clone)]
pub struct RemoteQa {
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteQa {
    pub fn new(base_url: &str, timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        RemoteQa { endpoint: format!("{}/answer", base_url.trim_end_matches('/')), agent }
    }

    /// Reads the base URL from `ARTQA_QA_BASE`.
    pub fn from_env(timeout: Duration) -> Option<Self> {
        std::env::var(QA_BASE_ENV).ok().map(|base| Self::new(&base, timeout))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn answer(&self, context: &str, question: &str) -> Result<AnswerSpan, QaError> {
        let unavailable = |e: &dyn std::fmt::Display| QaError::RemoteQaUnavailable(e.to_string());
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(AnswerRequest { context, question })
            .map_err(|e| unavailable(&e))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(QaError::RemoteQaUnavailable(format!("HTTP status {status}")));
        }
        let body: AnswerResponse = resp.body_mut().read_json().map_err(|e| unavailable(&e))?;
        span_from_response(context, body)
    }
}

fn span_from_response(context: &str, body: AnswerResponse) -> Result<AnswerSpan, QaError> {
    let len = context.chars().count();
    let out_of_bounds = QaError::SpanOutOfBounds { start: body.start, end: body.end, len };
    if body.start < 0 || body.end <= body.start || body.end as usize > len || !body.score.is_finite() {
        return Err(out_of_bounds);
    }
    let (start, end) = (body.start as usize, body.end as usize);
    let text = slice_chars(context, start, end).ok_or(out_of_bounds)?;
    if text != body.text {
        log::warn!("remote QA text {:?} differs from context slice {:?}; using the slice", body.text, text);
    }

    let byte_start = context.char_indices().nth(start).map_or(context.len(), |(b, _)| b);
    let sentence_index = split_sentences(context).iter().rposition(|s| s.start <= byte_start).unwrap_or(0);
    Ok(AnswerSpan { text: text.to_owned(), char_start: start, char_end: end, score: body.score, sentence_index })
}
