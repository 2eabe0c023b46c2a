//! Artwork corpora: records with visual and contextual sentences plus
//! question/answer annotations.
//!
//! A corpus file is UTF-8 JSON:
//!
//! ```json
//! {
//!   "records": [
//!     {"id": "mona-lisa", "title": "Mona Lisa",
//!      "visual_sentences": ["..."], "contextual_sentences": ["..."],
//!      "questions": [{"question": "...", "answer": "...", "kind": "visual"}]}
//!   ],
//!   "splits": {"mona-lisa": "test"}
//! }
//! ```
//!
//! `splits` is optional. Without it every record is in the test split; with
//! it, records that have no entry are excluded from evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("invalid corpus: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown artwork `{0}`")]
    UnknownArtwork(String),
    #[error("at least one question kind must be selected")]
    EmptyKinds,
}

/// Whether a question (or sentence) concerns depicted content or context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaKind {
    Visual,
    Contextual,
}

impl QaKind {
    pub const ALL: [QaKind; 2] = [QaKind::Visual, QaKind::Contextual];

    pub fn as_str(self) -> &'static str {
        match self {
            QaKind::Visual => "visual",
            QaKind::Contextual => "contextual",
        }
    }
}

impl fmt::Display for QaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QaKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "visual" => Ok(QaKind::Visual),
            "contextual" => Ok(QaKind::Contextual),
            other => Err(format!("unknown kind `{other}` (expected visual or contextual)")),
        }
    }
}

/// Which reference sentences to compare a description against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Visual,
    Contextual,
    All,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 3] = [ReferenceKind::Visual, ReferenceKind::Contextual, ReferenceKind::All];

    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceKind::Visual => "visual",
            ReferenceKind::Contextual => "contextual",
            ReferenceKind::All => "all",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReferenceKind::Visual => "Visual",
            ReferenceKind::Contextual => "Contextual",
            ReferenceKind::All => "All",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    #[serde(rename = "answer")]
    pub gold_answer: String,
    pub kind: QaKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtworkRecord {
    pub id: String,
    /// Painting name inserted into prompts.
    pub title: String,
    #[serde(default)]
    pub visual_sentences: Vec<String>,
    #[serde(default)]
    pub contextual_sentences: Vec<String>,
    #[serde(default)]
    pub questions: Vec<QaPair>,
}

/// A validated, immutable corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corpus {
    records: Vec<ArtworkRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    splits: Option<BTreeMap<String, Split>>,
}

impl Corpus {
    /// Validates `records` (and `splits`, when given), normalizing all text
    /// to NFC. Every violated invariant is reported, not just the first.
    pub fn new(records: Vec<ArtworkRecord>, splits: Option<BTreeMap<String, Split>>) -> Result<Self, CorpusError> {
        let records: Vec<ArtworkRecord> = records.into_iter().map(nfc_record).collect();
        let splits = splits.map(|m| m.into_iter().map(|(k, v)| (nfc(&k), v)).collect());
        let corpus = Corpus { records, splits };
        let problems = corpus.violations();
        if problems.is_empty() {
            Ok(corpus)
        } else {
            Err(CorpusError::Validation(problems))
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.records.is_empty() {
            problems.push("corpus has no records".to_owned());
        }
        let mut seen = BTreeSet::new();
        let mut reported = BTreeSet::new();
        for (i, rec) in self.records.iter().enumerate() {
            if rec.id.trim().is_empty() {
                problems.push(format!("record #{i}: id is empty"));
            } else if !seen.insert(rec.id.as_str()) && reported.insert(rec.id.as_str()) {
                problems.push(format!("duplicate id \"{}\"", rec.id));
            }
            if rec.title.trim().is_empty() {
                problems.push(format!("record \"{}\": title is empty", rec.id));
            }
            for (j, q) in rec.questions.iter().enumerate() {
                if q.question.trim().is_empty() {
                    problems.push(format!("record \"{}\" question #{j}: question is empty", rec.id));
                }
                if q.gold_answer.trim().is_empty() {
                    problems.push(format!("record \"{}\" question #{j}: answer is empty", rec.id));
                }
            }
        }
        if let Some(splits) = &self.splits {
            for id in splits.keys() {
                if !seen.contains(id.as_str()) {
                    problems.push(format!("split assignment for unknown id \"{id}\""));
                }
            }
        }
        problems
    }

    pub fn records(&self) -> &[ArtworkRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, artwork_id: &str) -> Result<&ArtworkRecord, CorpusError> {
        self.records
            .iter()
            .find(|r| r.id == artwork_id)
            .ok_or_else(|| CorpusError::UnknownArtwork(artwork_id.to_owned()))
    }

    /// The split of a record. `None` when an explicit split map exists and
    /// does not mention the id.
    pub fn split_of(&self, artwork_id: &str) -> Option<Split> {
        match &self.splits {
            None => Some(Split::Test),
            Some(map) => map.get(artwork_id).copied(),
        }
    }

    pub fn has_explicit_splits(&self) -> bool {
        self.splits.is_some()
    }

    /// Replaces the split assignment, validating it against the records.
    pub fn with_splits(self, splits: BTreeMap<String, Split>) -> Result<Self, CorpusError> {
        Corpus::new(self.records, Some(splits))
    }

    /// Records of the test split, in file order.
    pub fn test_records(&self) -> impl Iterator<Item = &ArtworkRecord> {
        self.records.iter().filter(|r| self.split_of(&r.id) == Some(Split::Test))
    }

    /// Reference sentences of one artwork. `All` yields the visual sentences
    /// followed by the contextual ones.
    pub fn reference_set(&self, artwork_id: &str, kind: ReferenceKind) -> Result<Vec<String>, CorpusError> {
        Ok(reference_sentences(self.get(artwork_id)?, kind))
    }

    /// Test-split questions of the selected kinds, in record order then
    /// question order.
    pub fn eval_questions(&self, kinds: &[QaKind]) -> Result<Vec<(&str, &QaPair)>, CorpusError> {
        if kinds.is_empty() {
            return Err(CorpusError::EmptyKinds);
        }
        Ok(self
            .test_records()
            .flat_map(|r| r.questions.iter().filter(|q| kinds.contains(&q.kind)).map(move |q| (r.id.as_str(), q)))
            .collect())
    }

    /// SHA-256 of the canonical JSON serialization, as lowercase hex.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("corpus serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Reference sentences of a record for one kind.
pub fn reference_sentences(record: &ArtworkRecord, kind: ReferenceKind) -> Vec<String> {
    match kind {
        ReferenceKind::Visual => record.visual_sentences.clone(),
        ReferenceKind::Contextual => record.contextual_sentences.clone(),
        ReferenceKind::All => record.visual_sentences.iter().chain(&record.contextual_sentences).cloned().collect(),
    }
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

fn nfc_record(r: ArtworkRecord) -> ArtworkRecord {
    let all = |v: Vec<String>| v.iter().map(|s| nfc(s)).collect();
    ArtworkRecord {
        id: nfc(&r.id),
        title: nfc(&r.title),
        visual_sentences: all(r.visual_sentences),
        contextual_sentences: all(r.contextual_sentences),
        questions: r
            .questions
            .into_iter()
            .map(|q| QaPair { question: nfc(&q.question), gold_answer: nfc(&q.gold_answer), kind: q.kind })
            .collect(),
    }
}

fn read_file(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CorpusError::FileNotFound(path.to_owned())
        } else {
            CorpusError::Io { path: path.to_owned(), source: e }
        }
    })
}

fn parse_error(path: &Path, e: serde_json::Error) -> CorpusError {
    CorpusError::Parse { path: path.to_owned(), line: e.line(), column: e.column(), message: e.to_string() }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    records: Vec<ArtworkRecord>,
    #[serde(default)]
    splits: Option<BTreeMap<String, Split>>,
}

/// Loads and validates a corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let raw = read_file(path)?;
    let file: CorpusFile = serde_json::from_str(&raw).map_err(|e| parse_error(path, e))?;
    Corpus::new(file.records, file.splits)
}

/// Loads a split file: a JSON object mapping artwork ids to
/// `"train"`, `"val"` or `"test"`.
pub fn load_split_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, Split>, CorpusError> {
    let path = path.as_ref();
    let raw = read_file(path)?;
    serde_json::from_str(&raw).map_err(|e| parse_error(path, e))
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(corpus).map_err(std::io::Error::other)?;
    std::fs::write(path, json + "\n")
}
