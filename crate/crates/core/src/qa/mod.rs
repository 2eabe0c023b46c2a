//! Extractive question answering over a generated description.
//!
//! Two engines sit behind [`QaEngine`]: a deterministic IDF-weighted
//! lexical extractor, and a client for a remote extractive-QA service that
//! returns a span of the context.
//!
//! Span offsets in [`AnswerSpan`] count Unicode scalar values (Rust
//! `char`s), not bytes.

mod lexical;
mod lexicon;
mod normalize;
mod remote;
mod sentences;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::IdfTable;

pub use lexical::extract_answer_lexical;
pub use lexicon::{colors, is_stopword, stopwords};
pub use normalize::{normalize_answer, ARTICLES};
pub use remote::{RemoteQa, QA_BASE_ENV};
pub use sentences::{split_sentences, Sentence};

#[derive(Debug, Error)]
pub enum QaError {
    #[error("context is empty")]
    EmptyContext,
    #[error("remote QA service unavailable: {0}")]
    RemoteQaUnavailable(String),
    #[error("remote QA span [{start}, {end}) is outside a context of {len} chars")]
    SpanOutOfBounds { start: i64, end: i64, len: usize },
}

/// An answer taken verbatim from its context.
///
/// Invariant: `context.chars().skip(char_start).take(char_end - char_start)`
/// equals `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    pub score: f64,
    pub sentence_index: usize,
}

impl AnswerSpan {
    /// Builds a span from a byte range of `context`.
    pub(crate) fn from_bytes(
        context: &str,
        byte_start: usize,
        byte_end: usize,
        score: f64,
        sentence_index: usize,
    ) -> Self {
        let char_start = context[..byte_start].chars().count();
        let char_end = char_start + context[byte_start..byte_end].chars().count();
        AnswerSpan { text: context[byte_start..byte_end].to_owned(), char_start, char_end, score, sentence_index }
    }
}

/// Substring of `s` between two char offsets, if both are in range.
pub fn slice_chars(s: &str, char_start: usize, char_end: usize) -> Option<&str> {
    if char_start > char_end {
        return None;
    }
    let byte_at = |idx: usize| {
        if idx == s.chars().count() {
            Some(s.len())
        } else {
            s.char_indices().nth(idx).map(|(b, _)| b)
        }
    };
    Some(&s[byte_at(char_start)?..byte_at(char_end)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QaBackendKind {
    #[default]
    Lexical,
    Remote,
}

impl QaBackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QaBackendKind::Lexical => "lexical",
            QaBackendKind::Remote => "remote",
        }
    }
}

impl std::str::FromStr for QaBackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(QaBackendKind::Lexical),
            "remote" => Ok(QaBackendKind::Remote),
            other => Err(format!("unknown QA backend `{other}` (expected lexical or remote)")),
        }
    }
}

/// A configured answering engine.
#[derive(Debug, Clone)]
pub enum QaEngine {
    Lexical,
    Remote(RemoteQa),
}

impl QaEngine {
    pub fn kind(&self) -> QaBackendKind {
        match self {
            QaEngine::Lexical => QaBackendKind::Lexical,
            QaEngine::Remote(_) => QaBackendKind::Remote,
        }
    }

    /// Answers `question` from `context`. The IDF table is only consulted by
    /// the lexical engine.
    pub fn answer(&self, context: &str, question: &str, idf: &IdfTable) -> Result<AnswerSpan, QaError> {
        if context.trim().is_empty() {
            return Err(QaError::EmptyContext);
        }
        match self {
            QaEngine::Lexical => extract_answer_lexical(context, question, idf),
            QaEngine::Remote(client) => client.answer(context, question),
        }
    }
}
