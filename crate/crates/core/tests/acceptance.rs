//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod oracles;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use artqa::corpus::{load_corpus, reference_sentences, Corpus, QaKind, ReferenceKind};
use artqa::experiment::{render, write_run, Experiment, ReportFormat, ReportRows, RunOptions};
use artqa::metrics::{
    accuracy, bleu1, cider, compute_idf, qa_f1, rouge_l, score_caption, tfidf_cosine, tokenize, IdfTable,
};
use artqa::pipeline::{reference_idf, Generator};
use artqa::qa::slice_chars;
use artqa::textgen::{
    render_prompt, Cache, Completion, FixtureBackend, GenError, GenerationBackend, GenerationRequest, RemoteBackend,
    API_KEY_ENV,
};
use artqa::{PipelineMode, PromptTemplateKind, QaEngine};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

type Check = Result<(), String>;

/// Name, time limit, check.
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn fixture_corpus() -> Result<Corpus, String> {
    load_corpus(fixture("corpus.json")).map_err(|e| e.to_string())
}

fn fixture_backend() -> Result<FixtureBackend, String> {
    FixtureBackend::from_file(fixture("generations.json")).map_err(|e| e.to_string())
}

/// `n` samples from `strategy`, reproducible across runs.
fn sample<S: Strategy>(strategy: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n).map(|_| strategy.new_tree(&mut runner).unwrap().current()).collect()
}

const WORDS: [&str; 24] = [
    "the",
    "portrait",
    "woman",
    "smiles",
    "landscape",
    "behind",
    "her",
    "oil",
    "on",
    "poplar",
    "panel",
    "painted",
    "florence",
    "sky",
    "blue",
    "swirling",
    "stars",
    "village",
    "night",
    "church",
    "cypress",
    "1889",
    "saint",
    "rémy",
];

fn text(words: &'static [&'static str], len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::sample::select(words), len).prop_map(|w| w.join(" "))
}

fn idf_of(texts: &[String]) -> Result<IdfTable, String> {
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
    compute_idf(&docs, 4).map_err(|e| e.to_string())
}

fn metric_identity() -> Check {
    let texts = sample(text(&WORDS, 4..=30), 50);
    let idf = idf_of(&texts)?;
    for t in &texts {
        let refs = std::slice::from_ref(t);
        let values = [
            ("bleu1", bleu1(t, refs)),
            ("rouge_l", rouge_l(t, refs)),
            ("tfidf_cosine", tfidf_cosine(t, t, &idf)),
            ("cider", cider(t, refs, &idf)),
        ];
        for (name, v) in values {
            let v = v.map_err(|e| e.to_string())?;
            ensure(close(v, 1.0, 1e-9), || format!("{name}({t:?}) = {v}"))?;
        }
    }
    Ok(())
}

fn metric_zero() -> Check {
    let left: &'static [&'static str] = &["red", "sky", "woman", "oil"];
    let right: &'static [&'static str] = &["blue", "river", "church", "panel"];
    let pairs = sample((text(left, 1..=12), text(right, 1..=12)), 50);
    let all: Vec<String> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let idf = idf_of(&all)?;
    for (a, b) in &pairs {
        let refs = std::slice::from_ref(b);
        let s = score_caption(a, refs, &idf).map_err(|e| e.to_string())?;
        let f1 = qa_f1(a, b).f1;
        for (name, v) in
            [("bleu1", s.bleu1), ("rouge_l", s.rouge_l), ("cider", s.cider), ("cosine", s.cosine), ("qa_f1", f1)]
        {
            ensure(v == 0.0, || format!("{name}({a:?}, {b:?}) = {v}"))?;
        }
    }
    Ok(())
}

fn oracle_equivalence() -> Check {
    const VOCAB: [&str; 8] = ["red", "sky", "the", "woman", "blue", "church", "night", "oil"];
    let cases = sample(
        (
            text(&VOCAB, 1..=12),
            proptest::collection::vec(text(&VOCAB, 1..=12), 1..=3),
            proptest::collection::vec(text(&VOCAB, 1..=12), 1..=6),
        ),
        200,
    );
    for (cand, refs, docs) in &cases {
        let idf = idf_of(docs)?;
        let oracle_docs = oracles::Docs::new(docs);
        let pairs = [
            ("bleu1", bleu1(cand, refs), oracles::bleu1(cand, refs)),
            ("rouge_l", rouge_l(cand, refs), oracles::rouge_l(cand, refs)),
            ("cider", cider(cand, refs, &idf), oracles::cider(cand, refs, &oracle_docs)),
            ("tfidf_cosine", tfidf_cosine(cand, &refs[0], &idf), oracles::tfidf_cosine(cand, &refs[0], &oracle_docs)),
        ];
        for (name, got, want) in pairs {
            let got = got.map_err(|e| e.to_string())?;
            ensure(close(got, want, 1e-9), || format!("{name}({cand:?}, {refs:?}): {got} vs oracle {want}"))?;
        }
    }
    Ok(())
}

fn qa_metric_reproduction() -> Check {
    let s = qa_f1("oil canvas", "oil on canvas");
    ensure(close(s.precision, 1.0, 1e-9), || format!("precision {}", s.precision))?;
    ensure(close(s.recall, 2.0 / 3.0, 1e-9), || format!("recall {}", s.recall))?;
    ensure(close(s.f1, 0.8, 1e-9), || format!("f1 {}", s.f1))?;

    let golds = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
    let preds = ["a", "b", "c", "d", "e", "f", "g", "x", "y", "z"];
    let acc = accuracy(&preds, &golds).map_err(|e| e.to_string())?;
    ensure(close(acc, 0.7, 1e-12), || format!("accuracy {acc}"))
}

fn prompt_exactness() -> Check {
    let title = "[A-Za-zÀ-ÿ0-9'&,.:() -]{0,30}[A-Za-z]";
    let question = "[A-Za-z0-9' ,-]{1,40}\\?";
    for (t, q) in sample((title, question), 20) {
        let general = render_prompt(PromptTemplateKind::General, &t, None).map_err(|e| e.to_string())?;
        let mut want = String::from("Describe and Contextualize the painting ");
        want += &t;
        ensure(general.as_bytes() == want.as_bytes(), || format!("{general:?} != {want:?}"))?;

        let qb = render_prompt(PromptTemplateKind::QuestionBased, &t, Some(&q)).map_err(|e| e.to_string())?;
        let want = ["Painting", t.as_str(), q.as_str()].join(" ");
        ensure(qb.as_bytes() == want.as_bytes(), || format!("{qb:?} != {want:?}"))?;
    }
    ensure(
        render_prompt(PromptTemplateKind::General, "Mona Lisa", None).as_deref()
            == Ok("Describe and Contextualize the painting Mona Lisa"),
        || "golden Mona Lisa prompt".into(),
    )
}

fn deterministic_end_to_end() -> Check {
    let corpus = fixture_corpus()?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for _ in 0..2 {
        let backend = fixture_backend()?;
        let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
        let run = exp
            .run_qa_eval(PipelineMode::QuestionBased, &QaEngine::Lexical, &QaKind::ALL)
            .map_err(|e| e.to_string())?;
        let ReportRows::Qa(rows) = &run.report.rows else { return Err("expected QA rows".into()) };
        ensure(rows.len() == 1 && rows[0].accuracy == 1.0, || format!("rows {rows:?}"))?;
        let dir = write_run(out.path(), &run.report, &run.manifest).map_err(|e| e.to_string())?;
        reports.push(std::fs::read(dir.join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(reports[0] == reports[1], || "report.json differs between runs".into())
}

fn cache_economy() -> Check {
    let corpus = fixture_corpus()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = Cache::open(dir.path()).map_err(|e| e.to_string())?;
    let mut calls = Vec::new();
    for _ in 0..2 {
        let backend = fixture_backend()?;
        let exp = Experiment::new(&corpus, Generator::new(&backend, Some(&cache)), RunOptions::default());
        let run = exp
            .run_qa_eval(PipelineMode::QuestionBased, &QaEngine::Lexical, &QaKind::ALL)
            .map_err(|e| e.to_string())?;
        calls.push((backend.calls(), run.manifest.stats.backend_calls));
    }
    ensure(calls[0].0 > 0 && calls[1] == (0, 0), || format!("calls per run {calls:?}"))
}

/// Answers every prompt with the named artwork's joined "all" references.
struct ReferenceEcho {
    texts: Vec<(String, String)>,
    calls: AtomicU64,
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
            .filter(|(title, _)| request.prompt_head.ends_with(title.as_str()))
            .max_by_key(|(title, _)| title.len())
            .ok_or_else(|| GenError::InvalidRequest("unknown title".into()))?;
        Ok(Completion { text: text.clone(), prompt_tokens: None, completion_tokens: None })
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

fn echo_identity() -> Check {
    let corpus = fixture_corpus()?;
    let texts = corpus
        .records()
        .iter()
        .map(|r| (r.title.clone(), reference_sentences(r, ReferenceKind::All).join(" ")))
        .collect();
    let backend = ReferenceEcho { texts, calls: AtomicU64::new(0) };
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let run = exp.run_caption_eval(PipelineMode::General).map_err(|e| e.to_string())?;
    let ReportRows::Captions(rows) = &run.report.rows else { return Err("expected caption rows".into()) };
    let all: Vec<_> = rows.iter().filter(|r| r.description_kind == ReferenceKind::All).collect();
    ensure(all.len() == 4, || format!("{} rows for kind=all", all.len()))?;
    for row in all {
        ensure(close(row.value, 1.0, 1e-9), || format!("{:?} = {}", row.metric, row.value))?;
    }
    Ok(())
}

fn report_shape() -> Check {
    let corpus = fixture_corpus()?;
    let backend = fixture_backend()?;
    let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
    let captions = exp.run_caption_eval(PipelineMode::General).map_err(|e| e.to_string())?;
    let md = render(&captions.report, ReportFormat::Markdown).map_err(|e| e.to_string())?;
    for needle in ["BLEU1", "ROUGE", "CIDEr", "COSINE", "Visual", "Contextual", "All"] {
        ensure(md.contains(needle), || format!("caption report lacks {needle:?}"))?;
    }
    let qa =
        exp.run_qa_eval(PipelineMode::QuestionBased, &QaEngine::Lexical, &QaKind::ALL).map_err(|e| e.to_string())?;
    let md = render(&qa.report, ReportFormat::Markdown).map_err(|e| e.to_string())?;
    let header = md.lines().find(|l| l.starts_with('|')).unwrap_or_default();
    for needle in ["Accuracy", "F1"] {
        ensure(header.contains(needle), || format!("QA header {header:?} lacks {needle:?}"))?;
    }
    Ok(())
}

enum Outcome {
    Ran(Check),
    Skipped(String),
}

fn live_smoke() -> Outcome {
    if std::env::var_os(API_KEY_ENV).is_none() {
        return Outcome::Skipped(format!("{API_KEY_ENV} not set"));
    }
    Outcome::Ran((|| {
        let full = fixture_corpus()?;
        let records = full.records()[..3].to_vec();
        let corpus = Corpus::new(records, None).map_err(|e| e.to_string())?;
        let idf = reference_idf(corpus.records()).map_err(|e| e.to_string())?;
        let backend = RemoteBackend::from_env();
        for mode in [PipelineMode::General, PipelineMode::QuestionBased] {
            let exp = Experiment::new(&corpus, Generator::new(&backend, None), RunOptions::default());
            let run = exp.run_qa_eval(mode, &QaEngine::Lexical, &QaKind::ALL).map_err(|e| e.to_string())?;
            for item in &run.manifest.qa_items {
                let context = item.context.as_deref().unwrap_or_default();
                ensure(!context.trim().is_empty(), || format!("empty generation for {}", item.artwork_id))?;
                let span = QaEngine::Lexical.answer(context, &item.question, &idf).map_err(|e| e.to_string())?;
                ensure(slice_chars(context, span.char_start, span.char_end) == Some(span.text.as_str()), || {
                    format!("invalid span for {}", item.artwork_id)
                })?;
            }
            let captions = exp.run_caption_eval(mode).map_err(|e| e.to_string())?;
            let ReportRows::Captions(rows) = &captions.report.rows else { return Err("expected caption rows".into()) };
            ensure(rows.iter().all(|r| r.value.is_finite()), || "non-finite caption metric".into())?;
        }
        Ok(())
    })())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("metric identity", Duration::from_secs(1), metric_identity),
        ("metric zero", Duration::from_secs(1), metric_zero),
        ("oracle equivalence", Duration::from_secs(10), oracle_equivalence),
        ("qa metric reproduction", Duration::MAX, qa_metric_reproduction),
        ("prompt exactness", Duration::MAX, prompt_exactness),
        ("deterministic end-to-end", Duration::from_secs(5), deterministic_end_to_end),
        ("cache economy", Duration::MAX, cache_economy),
        ("echo identity", Duration::from_secs(5), echo_identity),
        ("report shape", Duration::MAX, report_shape),
    ];

    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|()| ensure(elapsed <= limit, || format!("took {elapsed:?}, limit {limit:?}")));
        match result {
            Ok(()) => println!("PASS {name} ({:.1} ms)", elapsed.as_secs_f64() * 1e3),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    match live_smoke() {
        Outcome::Skipped(why) => println!("SKIP live smoke ({why})"),
        Outcome::Ran(Ok(())) => println!("PASS live smoke"),
        Outcome::Ran(Err(msg)) => {
            failed += 1;
            println!("FAIL live smoke: {msg}");
        }
    }

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
