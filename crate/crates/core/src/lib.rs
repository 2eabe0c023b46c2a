//! Question answering about artworks from generated descriptions.
//!
//! A text generator is prompted with a painting's title (optionally with the
//! question) and an extractive QA step picks the answer out of the generated
//! description. [`experiment`] runs both pipeline variants over a corpus and
//! scores descriptions with caption metrics and answers with accuracy / F1.

pub mod corpus;
pub mod experiment;
pub mod metrics;
pub mod pipeline;
pub mod qa;
pub mod textgen;

pub use corpus::{load_corpus, ArtworkRecord, Corpus, CorpusError, QaKind, QaPair, ReferenceKind, Split};
pub use experiment::{Experiment, PipelineMode, RunManifest, RunOptions};
pub use metrics::{CaptionScore, IdfTable, QaScore};
pub use pipeline::{Generator, PipelineError};
pub use qa::{AnswerSpan, QaBackendKind, QaEngine};
pub use textgen::{
    Cache, DecodingParams, GenError, GenerationBackend, GenerationRequest, GenerationResult, PromptTemplateKind,
};
