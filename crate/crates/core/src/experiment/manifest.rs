use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{QaKind, QaPair, ReferenceKind};
use crate::metrics::CaptionScore;
use crate::qa::AnswerSpan;
use crate::textgen::{canonical_json, sha256_hex, DecodingParams};

use super::PipelineMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Captions,
    Qa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemStatus {
    Ok,
    Failed,
    Skipped,
}

/// Metric and aggregation conventions, written into every manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conventions {
    pub rouge: String,
    pub cider: String,
    pub idf: String,
    pub qa_correct: String,
    pub caption_aggregation: String,
    pub qa_aggregation: String,
    pub span_offsets: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            rouge: "ROUGE-L F-measure, beta 1.2, max over references".into(),
            cider: "plain CIDEr, n = 1..4, no scaling, no length penalty".into(),
            idf: "ln(N / max(df, 1)) over the test split reference sets".into(),
            qa_correct: "normalized exact match".into(),
            caption_aggregation: "macro average over artworks with nonempty references".into(),
            qa_aggregation: "micro average over questions".into(),
            span_offsets: "unicode scalar values".into(),
        }
    }
}

/// One artwork of a caption run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionItem {
    pub artwork_id: String,
    pub status: ItemStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    /// Only kinds with a nonempty reference set are scored.
    pub scores: BTreeMap<ReferenceKind, CaptionScore>,
}

/// One question of a QA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub artwork_id: String,
    pub question: String,
    pub kind: QaKind,
    pub gold: String,
    pub status: ItemStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<AnswerSpan>,
}

impl QaItem {
    pub(crate) fn answered(artwork_id: &str, pair: &QaPair, context: String, span: AnswerSpan) -> Self {
        QaItem {
            artwork_id: artwork_id.to_owned(),
            question: pair.question.clone(),
            kind: pair.kind,
            gold: pair.gold_answer.clone(),
            status: ItemStatus::Ok,
            error: None,
            context: Some(context),
            answer: Some(span),
        }
    }

    pub(crate) fn failed(artwork_id: &str, pair: &QaPair, context: Option<String>, error: String) -> Self {
        QaItem {
            artwork_id: artwork_id.to_owned(),
            question: pair.question.clone(),
            kind: pair.kind,
            gold: pair.gold_answer.clone(),
            status: ItemStatus::Failed,
            error: Some(error),
            context,
            answer: None,
        }
    }

    /// The predicted answer text; failed questions predict the empty string.
    pub fn prediction(&self) -> &str {
        self.answer.as_ref().map_or("", |a| a.text.as_str())
    }
}

/// Backend traffic of a run. Differs between a fresh and a cached run, so
/// it is left out of the digest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub generations: usize,
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_kind: RunKind,
    pub corpus_digest: String,
    pub mode: PipelineMode,
    pub generation_backend: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa_backend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<QaKind>>,
    pub decoding: DecodingParams,
    pub code_version: String,
    pub conventions: Conventions,
    pub timestamp: DateTime<Utc>,
    pub stats: RunStats,
    /// Artworks without reference sentences of each kind.
    #[serde(default)]
    pub skipped_references: BTreeMap<ReferenceKind, usize>,
    #[serde(default)]
    pub caption_items: Vec<CaptionItem>,
    #[serde(default)]
    pub qa_items: Vec<QaItem>,
}

impl RunManifest {
    pub fn new(
        run_kind: RunKind,
        corpus_digest: String,
        mode: PipelineMode,
        generation_backend: &str,
        decoding: DecodingParams,
    ) -> Self {
        RunManifest {
            run_kind,
            corpus_digest,
            mode,
            generation_backend: generation_backend.to_owned(),
            qa_backend: None,
            kinds: None,
            decoding,
            code_version: env!("CARGO_PKG_VERSION").to_owned(),
            conventions: Conventions::default(),
            timestamp: Utc::now(),
            stats: RunStats::default(),
            skipped_references: BTreeMap::new(),
            caption_items: Vec::new(),
            qa_items: Vec::new(),
        }
    }

    /// SHA-256 of the canonical JSON without `timestamp` and `stats`.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("timestamp");
            map.remove("stats");
        }
        sha256_hex(canonical_json(&value).as_bytes())
    }

    /// `<UTC timestamp>-<first 8 digest chars>`, used as the run directory.
    pub fn run_id(&self) -> String {
        format!("{}-{}", self.timestamp.format("%Y%m%dT%H%M%SZ"), &self.digest()[..8])
    }
}
