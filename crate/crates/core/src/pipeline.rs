//! The describe-then-answer flow for a single artwork.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{reference_sentences, ArtworkRecord, Corpus, CorpusError, ReferenceKind};
use crate::metrics::{compute_idf, tokenize, IdfTable, MetricError};
use crate::qa::{AnswerSpan, QaEngine, QaError};
use crate::textgen::{
    cached_generate, generate, render_prompt, Cache, DecodingParams, GenError, GenerationBackend, GenerationRequest,
    GenerationResult, PromptError, PromptTemplateKind,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Qa(#[from] QaError),
}

/// Where generations come from: a backend, optionally behind a cache.
#[derive(Clone, Copy)]
pub struct Generator<'a> {
    pub backend: &'a dyn GenerationBackend,
    pub cache: Option<&'a Cache>,
    pub model_name: Option<&'a str>,
}

impl<'a> Generator<'a> {
    pub fn new(backend: &'a dyn GenerationBackend, cache: Option<&'a Cache>) -> Self {
        Generator { backend, cache, model_name: None }
    }

    pub fn decoding(&self, mode: PromptTemplateKind) -> DecodingParams {
        let mut decoding = DecodingParams::for_mode(mode);
        if let Some(model) = self.model_name {
            decoding.model_name = model.to_owned();
        }
        decoding
    }

    /// Builds the request for one artwork (and question, in question-based
    /// mode).
    pub fn request(
        &self,
        mode: PromptTemplateKind,
        title: &str,
        question: Option<&str>,
    ) -> Result<GenerationRequest, PipelineError> {
        let prompt = render_prompt(mode, title, question)?;
        Ok(GenerationRequest::new(prompt, self.decoding(mode), self.backend.id())?)
    }

    pub fn run(&self, request: &GenerationRequest) -> Result<GenerationResult, GenError> {
        match self.cache {
            Some(cache) => cached_generate(cache, self.backend, request),
            None => generate(self.backend, request),
        }
    }
}

/// Unigram IDF over each record's full reference set (visual followed by
/// contextual sentences), one document per record.
pub fn reference_idf<'r>(records: impl IntoIterator<Item = &'r ArtworkRecord>) -> Result<IdfTable, MetricError> {
    let docs: Vec<Vec<String>> =
        records.into_iter().map(|r| tokenize(&reference_sentences(r, ReferenceKind::All).join(" "))).collect();
    compute_idf(&docs, 1)
}

#[derive(Debug, Clone, Serialize)]
pub struct Description {
    pub context: String,
    pub cached: bool,
}

/// Generates the description an answer would be extracted from.
pub fn describe(
    corpus: &Corpus,
    generator: Generator<'_>,
    artwork_id: &str,
    mode: PromptTemplateKind,
    question: Option<&str>,
) -> Result<Description, PipelineError> {
    let record = corpus.get(artwork_id)?;
    let request = generator.request(mode, &record.title, question)?;
    let result = generator.run(&request)?;
    Ok(Description { context: result.text, cached: result.cached })
}

#[derive(Debug, Clone, Serialize)]
pub struct Answer {
    pub span: AnswerSpan,
    pub context: String,
    pub mode: PromptTemplateKind,
    pub cached: bool,
}

/// Generates a description for `artwork_id` (general or conditioned on the
/// question) and extracts the answer from it.
pub fn ask(
    corpus: &Corpus,
    generator: Generator<'_>,
    engine: &QaEngine,
    idf: &IdfTable,
    artwork_id: &str,
    question: &str,
    mode: PromptTemplateKind,
) -> Result<Answer, PipelineError> {
    let prompt_question = match mode {
        PromptTemplateKind::General => None,
        PromptTemplateKind::QuestionBased => Some(question),
    };
    let description = describe(corpus, generator, artwork_id, mode, prompt_question)?;
    let span = engine.answer(&description.context, question, idf)?;
    Ok(Answer { span, context: description.context, mode, cached: description.cached })
}
