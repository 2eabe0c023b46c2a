//! Caption and answer quality metrics.
//!
//! Caption metrics (BLEU1, ROUGE-L, CIDEr, TF-IDF cosine) share the
//! [`tokenize`] function and, for the IDF-weighted ones, an [`IdfTable`]
//! built over the reference corpus. Answer metrics (token F1 and exact-match
//! accuracy) use the answer normalization from [`crate::qa`].
//!
//! All counters are `BTreeMap`s so that floating point sums run in a fixed
//! order and reports stay byte-stable across runs.

mod answer;
mod bleu;
mod cider;
mod cosine;
mod idf;
mod ngram;
mod rouge;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use answer::{accuracy, exact_match, qa_f1, score_answers, QaScore, TokenF1};
pub use bleu::bleu1;
pub use cider::cider;
pub use cosine::tfidf_cosine;
pub use idf::{compute_idf, IdfTable};
pub use ngram::{ngrams, tokenize, NgramCounts};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};

/// Highest n-gram order used by CIDEr.
pub const CIDER_MAX_N: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("n-gram order must be at least 1, got {0}")]
    BadN(usize),
    #[error("no references given")]
    NoReferences,
    #[error("cannot build IDF statistics from an empty document set")]
    EmptyCorpus,
    #[error("IDF table covers n-grams up to {have}, but order {need} was requested")]
    MissingIdf { need: usize, have: usize },
    #[error("predictions and golds differ in length ({predictions} vs {golds})")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("empty batch")]
    EmptyBatch,
}

/// One candidate scored with every caption metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptionScore {
    pub bleu1: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub cosine: f64,
}

/// Scores `candidate` against `references` with all four caption metrics.
///
/// The cosine similarity compares the candidate with the references joined
/// into a single document.
pub fn score_caption(candidate: &str, references: &[String], idf: &IdfTable) -> Result<CaptionScore, MetricError> {
    let joined = references.join(" ");
    Ok(CaptionScore {
        bleu1: bleu1(candidate, references)?,
        rouge_l: rouge_l(candidate, references)?,
        cider: cider(candidate, references, idf)?,
        cosine: tfidf_cosine(candidate, &joined, idf)?,
    })
}

/// Cosine similarity of two sparse vectors given as sorted maps with the
/// same key type. Zero when either vector is zero.
pub(crate) fn sparse_cosine<K: Ord>(
    a: &std::collections::BTreeMap<K, f64>,
    b: &std::collections::BTreeMap<K, f64>,
) -> f64 {
    let norm_a = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let norm_b = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(k, va)| b.get(k).map(|vb| va * vb)).sum();
    // rounding can push identical vectors a hair above 1
    (dot / (norm_a * norm_b)).clamp(0.0, 1.0)
}
