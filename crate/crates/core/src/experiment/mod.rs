//! Evaluation runs over a corpus: caption quality of generated descriptions
//! and answer quality of the full describe-then-answer pipeline.
//!
//! Every aggregate in a report is derived from the per-item records kept in
//! the [`RunManifest`], via [`caption_rows`] and [`qa_rows`].

mod config;
mod manifest;
mod report;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::corpus::{reference_sentences, Corpus, CorpusError, QaKind, ReferenceKind};
use crate::metrics::{compute_idf, score_caption, tokenize, MetricError, CIDER_MAX_N};
use crate::pipeline::{reference_idf, Generator, PipelineError};
use crate::qa::QaEngine;
use crate::textgen::{GenError, GenerationRequest, GenerationResult, PromptTemplateKind};

pub use config::{BackendChoice, RunConfig};
pub use manifest::{CaptionItem, Conventions, ItemStatus, QaItem, RunKind, RunManifest, RunStats};
pub use report::{
    caption_rows, qa_rows, render, write_run, CaptionReportRow, MetricName, QaReportRow, Report, ReportError,
    ReportFormat, ReportRows,
};

/// The two pipeline variants share the prompt template enum.
pub type PipelineMode = PromptTemplateKind;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("the test split has no records")]
    EmptyTestSplit,
    #[error("the test split has no questions of the requested kinds")]
    NoQuestions,
    #[error("{failed} of {total} artworks failed, above the allowed fraction {threshold}")]
    TooManyFailures { failed: usize, total: usize, threshold: f64 },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl ExperimentError {
    /// Whether the failure came from a generation or QA backend.
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self,
            ExperimentError::TooManyFailures { .. }
                | ExperimentError::Pipeline(PipelineError::Generation(_) | PipelineError::Qa(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Concurrent generation requests.
    pub parallelism: usize,
    /// A run fails when more than this fraction of artworks fail.
    pub max_failure_fraction: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { parallelism: 4, max_failure_fraction: 0.5 }
    }
}

/// Result of an evaluation run.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: Report,
    pub manifest: RunManifest,
}

/// Runs `f` over `items` with at most `parallelism` threads, keeping order.
fn fan_out<T: Sync, R: Send>(items: &[T], parallelism: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = parallelism.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = std::iter::repeat_with(|| None).take(items.len()).collect();
    let done: Vec<Vec<(usize, R)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break out;
                        }
                        out.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|s| s.expect("every item processed")).collect()
}

struct Job<'c> {
    artwork_id: &'c str,
    request: GenerationRequest,
}

/// Runs experiments for one corpus against one generator.
pub struct Experiment<'a> {
    corpus: &'a Corpus,
    generator: Generator<'a>,
    options: RunOptions,
}

impl<'a> Experiment<'a> {
    pub fn new(corpus: &'a Corpus, generator: Generator<'a>, options: RunOptions) -> Self {
        Experiment { corpus, generator, options }
    }

    fn generate_all(&self, jobs: &[Job<'_>], stats: &mut RunStats) -> Vec<Result<GenerationResult, GenError>> {
        let calls_before = self.generator.backend.calls();
        let results = fan_out(jobs, self.options.parallelism, |job| self.generator.run(&job.request));
        stats.generations += jobs.len();
        stats.backend_calls += (self.generator.backend.calls() - calls_before) as usize;
        stats.cache_hits += results.iter().filter(|r| matches!(r, Ok(g) if g.cached)).count();
        results
    }

    fn check_failures(&self, failed: usize, total: usize) -> Result<(), ExperimentError> {
        let threshold = self.options.max_failure_fraction;
        if total > 0 && failed as f64 > threshold * total as f64 {
            return Err(ExperimentError::TooManyFailures { failed, total, threshold });
        }
        Ok(())
    }

    /// Generation requests a run in `mode` would issue: one per test artwork
    /// (general) or one per test question (question based).
    pub fn planned_requests(&self, mode: PipelineMode) -> Result<Vec<GenerationRequest>, ExperimentError> {
        Ok(self.caption_jobs(mode)?.into_iter().map(|j| j.request).collect())
    }

    fn caption_jobs(&self, mode: PipelineMode) -> Result<Vec<Job<'a>>, ExperimentError> {
        let mut jobs = Vec::new();
        for record in self.corpus.test_records() {
            match mode {
                PipelineMode::General => jobs
                    .push(Job { artwork_id: &record.id, request: self.generator.request(mode, &record.title, None)? }),
                PipelineMode::QuestionBased => {
                    for q in &record.questions {
                        jobs.push(Job {
                            artwork_id: &record.id,
                            request: self.generator.request(mode, &record.title, Some(&q.question))?,
                        });
                    }
                }
            }
        }
        Ok(jobs)
    }

    /// Generates (or loads from cache) every description of a run without
    /// scoring anything.
    pub fn warm(&self, mode: PipelineMode) -> Result<(RunStats, Vec<(String, GenError)>), ExperimentError> {
        let jobs = self.caption_jobs(mode)?;
        let mut stats = RunStats::default();
        let results = self.generate_all(&jobs, &mut stats);
        let failures =
            jobs.iter().zip(results).filter_map(|(job, r)| r.err().map(|e| (job.artwork_id.to_owned(), e))).collect();
        Ok((stats, failures))
    }

    /// Scores generated descriptions against visual, contextual and all
    /// reference sentences.
    ///
    /// In question-based mode an artwork's candidate is the space-joined
    /// concatenation of its per-question generations, in question order.
    /// Each reference set is joined into one reference document.
    pub fn run_caption_eval(&self, mode: PipelineMode) -> Result<Run, ExperimentError> {
        let records: Vec<_> = self.corpus.test_records().collect();
        if records.is_empty() {
            return Err(ExperimentError::EmptyTestSplit);
        }
        let jobs = self.caption_jobs(mode)?;
        let mut stats = RunStats::default();
        let results = self.generate_all(&jobs, &mut stats);

        let mut per_artwork: BTreeMap<&str, Vec<&Result<GenerationResult, GenError>>> = BTreeMap::new();
        for (job, result) in jobs.iter().zip(&results) {
            per_artwork.entry(job.artwork_id).or_default().push(result);
        }

        // one IDF table per reference kind, one document per artwork
        let mut idf_tables = BTreeMap::new();
        let mut skipped_references = BTreeMap::new();
        for kind in ReferenceKind::ALL {
            let docs: Vec<Vec<String>> = records
                .iter()
                .map(|r| reference_sentences(r, kind))
                .filter(|refs| !refs.is_empty())
                .map(|refs| tokenize(&refs.join(" ")))
                .collect();
            skipped_references.insert(kind, records.len() - docs.len());
            if !docs.is_empty() {
                idf_tables.insert(kind, compute_idf(&docs, CIDER_MAX_N)?);
            }
        }

        let mut items = Vec::new();
        let mut failed = 0;
        for record in &records {
            let outputs = per_artwork.remove(record.id.as_str()).unwrap_or_default();
            let mut item = CaptionItem {
                artwork_id: record.id.clone(),
                status: ItemStatus::Ok,
                error: None,
                candidate: None,
                scores: BTreeMap::new(),
            };
            if outputs.is_empty() {
                item.status = ItemStatus::Skipped;
                item.error = Some("no questions to condition on".into());
                items.push(item);
                continue;
            }
            if let Some(err) = outputs.iter().find_map(|r| r.as_ref().err()) {
                failed += 1;
                item.status = ItemStatus::Failed;
                item.error = Some(err.to_string());
                items.push(item);
                continue;
            }
            let candidate =
                outputs.iter().map(|r| r.as_ref().expect("checked above").text.as_str()).collect::<Vec<_>>().join(" ");
            for kind in ReferenceKind::ALL {
                let refs = reference_sentences(record, kind);
                if refs.is_empty() {
                    continue;
                }
                let reference_doc = vec![refs.join(" ")];
                let idf = &idf_tables[&kind];
                item.scores.insert(kind, score_caption(&candidate, &reference_doc, idf)?);
            }
            item.candidate = Some(candidate);
            items.push(item);
        }
        self.check_failures(failed, records.len())?;
        stats.failures = failed;

        let mut manifest = RunManifest::new(
            RunKind::Captions,
            self.corpus.digest(),
            mode,
            self.generator.backend.id(),
            self.generator.decoding(mode),
        );
        manifest.stats = stats;
        manifest.skipped_references = skipped_references;
        manifest.caption_items = items;
        let rows = caption_rows(&manifest);
        Ok(Run { report: Report::new(ReportRows::Captions(rows), &manifest), manifest })
    }

    /// Answers the test questions of the selected kinds and scores them.
    ///
    /// General mode generates one description per artwork and reuses it for
    /// all of its questions; question-based mode generates one per question.
    pub fn run_qa_eval(&self, mode: PipelineMode, engine: &QaEngine, kinds: &[QaKind]) -> Result<Run, ExperimentError> {
        let questions = self.corpus.eval_questions(kinds)?;
        if questions.is_empty() {
            return Err(ExperimentError::NoQuestions);
        }
        let idf = reference_idf(self.corpus.test_records())?;

        // job index for every question
        let mut jobs: Vec<Job<'_>> = Vec::new();
        let mut job_of_question = Vec::with_capacity(questions.len());
        let mut general_job: BTreeMap<&str, usize> = BTreeMap::new();
        for (artwork_id, pair) in &questions {
            if mode == PipelineMode::General {
                if let Some(&idx) = general_job.get(artwork_id) {
                    job_of_question.push(idx);
                    continue;
                }
            }
            let record = self.corpus.get(artwork_id)?;
            let question = (mode == PipelineMode::QuestionBased).then_some(pair.question.as_str());
            jobs.push(Job { artwork_id, request: self.generator.request(mode, &record.title, question)? });
            general_job.insert(artwork_id, jobs.len() - 1);
            job_of_question.push(jobs.len() - 1);
        }

        let mut stats = RunStats::default();
        let results = self.generate_all(&jobs, &mut stats);

        let answers = fan_out(&(0..questions.len()).collect::<Vec<_>>(), self.options.parallelism, |&i| {
            let (_, pair) = questions[i];
            results[job_of_question[i]].as_ref().map_err(|e| e.to_string()).and_then(|g| {
                engine
                    .answer(&g.text, &pair.question, &idf)
                    .map(|span| (g.text.clone(), span))
                    .map_err(|e| e.to_string())
            })
        });

        let mut items = Vec::with_capacity(questions.len());
        let mut failed_artworks = std::collections::BTreeSet::new();
        let mut artworks = std::collections::BTreeSet::new();
        for (i, ((artwork_id, pair), answer)) in questions.iter().zip(answers).enumerate() {
            artworks.insert(*artwork_id);
            let item = match answer {
                Ok((context, span)) => QaItem::answered(artwork_id, pair, context, span),
                Err(error) => {
                    failed_artworks.insert(*artwork_id);
                    let context = results[job_of_question[i]].as_ref().ok().map(|g| g.text.clone());
                    QaItem::failed(artwork_id, pair, context, error)
                }
            };
            items.push(item);
        }
        self.check_failures(failed_artworks.len(), artworks.len())?;
        stats.failures = failed_artworks.len();

        let mut kinds_sorted = kinds.to_vec();
        kinds_sorted.sort();
        kinds_sorted.dedup();
        let mut manifest = RunManifest::new(
            RunKind::Qa,
            self.corpus.digest(),
            mode,
            self.generator.backend.id(),
            self.generator.decoding(mode),
        );
        manifest.qa_backend = Some(engine.kind().as_str().to_owned());
        manifest.kinds = Some(kinds_sorted);
        manifest.stats = stats;
        manifest.qa_items = items;
        let rows = qa_rows(&manifest);
        if rows.is_empty() {
            return Err(ExperimentError::NoQuestions);
        }
        Ok(Run { report: Report::new(ReportRows::Qa(rows), &manifest), manifest })
    }
}
