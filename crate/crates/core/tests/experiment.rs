use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use artqa::corpus::{load_corpus, reference_sentences, ArtworkRecord, Corpus, QaKind, QaPair, ReferenceKind};
use artqa::experiment::{
    caption_rows, qa_rows, render, write_run, Experiment, ExperimentError, ItemStatus, MetricName, ReportFormat,
    ReportRows, RunOptions,
};
use artqa::metrics::exact_match;
use artqa::pipeline::Generator;
use artqa::textgen::{Cache, Completion, FixtureBackend, GenError, GenerationBackend, GenerationRequest};
use artqa::{PipelineMode, QaEngine};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn corpus() -> Corpus {
    load_corpus(fixture("corpus.json")).unwrap()
}

fn fixtures() -> FixtureBackend {
    FixtureBackend::from_file(fixture("generations.json")).unwrap()
}

/// Returns the record's joined "all" references for any prompt naming it.
struct ReferenceEcho {
    texts: Vec<(String, String)>,
    calls: AtomicU64,
}

impl ReferenceEcho {
    fn new(corpus: &Corpus) -> Self {
        let texts = corpus
            .records()
            .iter()
            .map(|r| (r.title.clone(), reference_sentences(r, ReferenceKind::All).join(" ")))
            .collect();
        ReferenceEcho { texts, calls: AtomicU64::new(0) }
    }
}

impl GenerationBackend for ReferenceEcho {
    fn id(&self) -> &str {
        "reference-echo"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, GenError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let (_, text) = self
            .texts
            .iter()
            .filter(|(title, _)| request.prompt_head.contains(title.as_str()))
            .max_by_key(|(title, _)| title.len())
            .expect("known title");
        Ok(Completion { text: text.clone(), prompt_tokens: None, completion_tokens: None })
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Fails for the listed titles, otherwise returns a fixed sentence.
struct Flaky {
    failing: Vec<&'static str>,
    calls: AtomicU64,
}

impl GenerationBackend for Flaky {
    fn id(&self) -> &str {
        "flaky"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<Completion, GenError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if self.failing.iter().any(|t| request.prompt_head.ends_with(t)) {
            return Err(GenError::BackendRefused { status: 429, message: "quota".into() });
        }
        Ok(Completion { text: "zzz qqq xxx".into(), prompt_tokens: None, completion_tokens: None })
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[test]
fn question_based_fixture_answers_everything() {
    let corpus = corpus();
    let backend = fixtures();
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let run = exp.run_qa_eval(PipelineMode::QuestionBased, &QaEngine::Lexical, &QaKind::ALL).unwrap();
    let ReportRows::Qa(rows) = &run.report.rows else { panic!("qa rows") };
    assert_eq!(rows.len(), 1);
    for item in &run.manifest.qa_items {
        assert!(exact_match(item.prediction(), &item.gold), "{}: {}", item.question, item.prediction());
    }
    assert_eq!(rows[0].accuracy, 1.0);
    assert_eq!(rows[0].f1, 1.0);
    assert!(rows[0].visual_on && rows[0].contextual_on);
    // one generation per question
    assert_eq!(backend.calls(), 10);
}

#[test]
fn general_mode_generates_once_per_artwork() {
    let corpus = corpus();
    let backend = fixtures();
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let run = exp.run_qa_eval(PipelineMode::General, &QaEngine::Lexical, &QaKind::ALL).unwrap();
    assert_eq!(backend.calls(), 10);
    assert_eq!(run.manifest.qa_items.len(), 10);
    let ReportRows::Qa(rows) = &run.report.rows else { panic!("qa rows") };
    assert!((0.0..=1.0).contains(&rows[0].accuracy));
}

#[test]
fn kinds_select_questions() {
    let corpus = corpus();
    let backend = fixtures();
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let visual = exp.run_qa_eval(PipelineMode::QuestionBased, &QaEngine::Lexical, &[QaKind::Visual]).unwrap();
    let both = exp.run_qa_eval(PipelineMode::QuestionBased, &QaEngine::Lexical, &QaKind::ALL).unwrap();
    assert_eq!(visual.report.rows.len(), 1);
    assert_eq!(both.report.rows.len(), 1);
    assert_eq!(visual.manifest.qa_items.len(), 5);
    assert!(visual.manifest.qa_items.iter().all(|q| q.kind == QaKind::Visual));
    assert_ne!(visual.manifest.digest(), both.manifest.digest());
    let ReportRows::Qa(rows) = &visual.report.rows else { panic!("qa rows") };
    assert!(rows[0].visual_on && !rows[0].contextual_on);
    assert!(matches!(
        exp.run_qa_eval(PipelineMode::QuestionBased, &QaEngine::Lexical, &[]),
        Err(ExperimentError::Corpus(_))
    ));
}

#[test]
fn reports_are_byte_identical_across_runs_and_recomputable() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for _ in 0..2 {
        let backend = fixtures();
        let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
        let run = exp.run_qa_eval(PipelineMode::QuestionBased, &QaEngine::Lexical, &QaKind::ALL).unwrap();
        let run_dir = write_run(dir.path(), &run.report, &run.manifest).unwrap();
        reports.push(std::fs::read(run_dir.join("report.json")).unwrap());

        let manifest_json = std::fs::read_to_string(run_dir.join("manifest.json")).unwrap();
        let back: artqa::RunManifest = serde_json::from_str(&manifest_json).unwrap();
        let (ReportRows::Qa(a), b) = (&run.report.rows, qa_rows(&back)) else { panic!() };
        assert!((a[0].accuracy - b[0].accuracy).abs() < 1e-12);
        assert!((a[0].f1 - b[0].f1).abs() < 1e-12);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn second_cached_run_makes_no_backend_calls() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::open(dir.path()).unwrap();
    let first = fixtures();
    let exp = Experiment::new(&corpus, Generator::new(&first, Some(&cache)), RunOptions::default());
    exp.run_caption_eval(PipelineMode::QuestionBased).unwrap();
    assert_eq!(first.calls(), 10);

    let second = fixtures();
    let exp = Experiment::new(&corpus, Generator::new(&second, Some(&cache)), RunOptions::default());
    let run = exp.run_caption_eval(PipelineMode::QuestionBased).unwrap();
    assert_eq!(second.calls(), 0);
    assert_eq!(run.manifest.stats.backend_calls, 0);
    assert_eq!(run.manifest.stats.cache_hits, 10);
}

#[test]
fn echo_of_references_scores_one_for_all() {
    let corpus = corpus();
    let backend = ReferenceEcho::new(&corpus);
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let run = exp.run_caption_eval(PipelineMode::General).unwrap();
    let ReportRows::Captions(rows) = &run.report.rows else { panic!("caption rows") };
    assert_eq!(rows.len(), 12);
    for row in rows.iter().filter(|r| r.description_kind == ReferenceKind::All) {
        assert!((row.value - 1.0).abs() < 1e-9, "{:?}", row);
    }
    let md = render(&run.report, ReportFormat::Markdown).unwrap();
    for label in ["BLEU1", "ROUGE", "CIDEr", "COSINE", "Visual", "Contextual", "All"] {
        assert!(md.contains(label));
    }
    for (a, b) in rows.iter().zip(caption_rows(&run.manifest)) {
        assert!((a.value - b.value).abs() < 1e-12);
    }
}

#[test]
fn disjoint_text_scores_zero() {
    let corpus = corpus();
    let backend = Flaky { failing: Vec::new(), calls: AtomicU64::new(0) };
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let run = exp.run_caption_eval(PipelineMode::General).unwrap();
    let ReportRows::Captions(rows) = &run.report.rows else { panic!("caption rows") };
    assert!(rows.iter().all(|r| r.value == 0.0));
}

#[test]
fn question_based_captions_concatenate_in_question_order() {
    let record = ArtworkRecord {
        id: "a".into(),
        title: "A".into(),
        visual_sentences: vec!["red one".into()],
        contextual_sentences: vec!["made in 1900".into()],
        questions: vec![
            QaPair { question: "q1?".into(), gold_answer: "x".into(), kind: QaKind::Visual },
            QaPair { question: "q2?".into(), gold_answer: "y".into(), kind: QaKind::Contextual },
        ],
    };
    let corpus = Corpus::new(vec![record], None).unwrap();
    let backend = FixtureBackend::from_pairs([("Painting A q1?", "first part"), ("Painting A q2?", "second part")]);
    let exp =
        Experiment::new(&corpus, Generator::new(&backend, None), RunOptions { parallelism: 2, ..Default::default() });
    let run = exp.run_caption_eval(PipelineMode::QuestionBased).unwrap();
    assert_eq!(run.manifest.caption_items[0].candidate.as_deref(), Some("first part second part"));
}

#[test]
fn empty_reference_sets_are_skipped_and_counted() {
    let mut records = corpus().records().to_vec();
    records[0].visual_sentences.clear();
    records[1].visual_sentences.clear();
    let corpus = Corpus::new(records, None).unwrap();
    let backend = fixtures();
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let run = exp.run_caption_eval(PipelineMode::General).unwrap();
    assert_eq!(run.manifest.skipped_references[&ReferenceKind::Visual], 2);
    assert!(!run.manifest.caption_items[0].scores.contains_key(&ReferenceKind::Visual));
    assert_eq!(run.report.rows.len(), 12);
}

#[test]
fn failures_are_recorded_until_the_threshold() {
    let corpus = corpus();
    let titles: Vec<&'static str> = vec!["Mona Lisa", "The Scream", "Guernica"];
    let backend = Flaky { failing: titles, calls: AtomicU64::new(0) };
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let run = exp.run_caption_eval(PipelineMode::General).unwrap();
    let failed: Vec<_> = run.manifest.caption_items.iter().filter(|i| i.status == ItemStatus::Failed).collect();
    assert_eq!(failed.len(), 3);
    assert!(failed[0].error.as_deref().unwrap().contains("429"));
    assert_eq!(run.manifest.stats.failures, 3);

    let strict = Experiment::new(
        &corpus,
        Generator::new(&backend, None),
        RunOptions { max_failure_fraction: 0.2, ..Default::default() },
    );
    let err = strict.run_caption_eval(PipelineMode::General).unwrap_err();
    assert!(matches!(err, ExperimentError::TooManyFailures { failed: 3, total: 10, .. }));
    assert!(err.is_backend_failure());

    let qa = exp.run_qa_eval(PipelineMode::General, &QaEngine::Lexical, &QaKind::ALL).unwrap();
    let failed_qa = qa.manifest.qa_items.iter().filter(|q| q.status == ItemStatus::Failed).count();
    assert_eq!(failed_qa, 3);
}

#[test]
fn mode_cardinality() {
    let corpus = corpus();
    let backend = fixtures();
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    assert_eq!(exp.planned_requests(PipelineMode::General).unwrap().len(), corpus.len());
    let questions: usize = corpus.records().iter().map(|r| r.questions.len()).sum();
    assert_eq!(exp.planned_requests(PipelineMode::QuestionBased).unwrap().len(), questions);
    let (stats, failures) = exp.warm(PipelineMode::General).unwrap();
    assert_eq!(stats.generations, corpus.len());
    assert!(failures.is_empty());
}

#[test]
fn metric_rows_cover_every_metric_per_kind() {
    let corpus = corpus();
    let backend = fixtures();
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let run = exp.run_caption_eval(PipelineMode::General).unwrap();
    let ReportRows::Captions(rows) = &run.report.rows else { panic!("caption rows") };
    let mut seen: BTreeMap<ReferenceKind, Vec<MetricName>> = BTreeMap::new();
    for r in rows {
        assert!(r.value.is_finite() && r.value >= 0.0);
        seen.entry(r.description_kind).or_default().push(r.metric);
    }
    for kind in ReferenceKind::ALL {
        assert_eq!(seen[&kind], MetricName::ALL.to_vec());
    }
}
