//! `artqa` command line. Every subcommand parses its flags, calls into the
//! core library and formats the result; exit codes are 1 for usage errors,
//! 2 for backend failures and 3 for invalid corpora.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use artqa::corpus::{load_corpus, load_split_file, Corpus, CorpusError, QaKind};
use artqa::experiment::{
    render, write_run, BackendChoice, Experiment, ExperimentError, ReportFormat, RunConfig, RunOptions,
};
use artqa::pipeline::{self, reference_idf, Generator, PipelineError};
use artqa::qa::{QaBackendKind, QaEngine, RemoteQa};
use artqa::textgen::{
    approx_token_count, estimate_cost, Cache, GenerationBackend, Pricing, RemoteBackend, CACHE_DIR_ENV,
};
use artqa::PipelineMode;
use artqa_server::{AppState, ServerConfig, BIND_ENV, DEFAULT_BIND};

pub const DEFAULT_CACHE_DIR: &str = ".artqa-cache";
const DEFAULT_CORPUS: &str = "fixtures/corpus.json";
const DEFAULT_FIXTURES: &str = "fixtures/generations.json";
const REMOTE_QA_TIMEOUT: Duration = Duration::from_secs(30);

fn choice<T>(values: &'static [&'static str]) -> impl TypedValueParser<Value = T>
where
    T: FromStr + Clone + Send + Sync + 'static,
    T::Err: std::fmt::Debug,
{
    PossibleValuesParser::new(values).map(|s| s.parse::<T>().expect("restricted to valid values"))
}

fn mode_parser() -> impl TypedValueParser<Value = PipelineMode> {
    choice(&["general", "question_based"])
}

fn backend_parser() -> impl TypedValueParser<Value = BackendChoice> {
    choice(&["remote", "fixture", "echo"])
}

fn qa_parser() -> impl TypedValueParser<Value = QaBackendKind> {
    choice(&["lexical", "remote"])
}

fn kind_parser() -> impl TypedValueParser<Value = QaKind> {
    choice(&["visual", "contextual"])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Markdown,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "artqa", version, about = "Answer questions about artworks from generated descriptions")]
pub struct Cli {
    /// Log more on standard error (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a corpus file and list every problem found
    Validate(ValidateArgs),
    /// Generate and cache every description an evaluation needs
    Generate(GenerateArgs),
    /// Answer one question about one artwork
    Ask(AskArgs),
    /// Score generated descriptions against reference sentences
    EvalCaptions(RunArgs),
    /// Score answers to the corpus questions
    EvalQa(EvalQaArgs),
    /// Run the HTTP API
    Serve(ServeArgs),
    /// Show the number and size of cached generations
    CacheStats(CacheArgs),
    /// Delete every cached generation
    CacheClear(CacheArgs),
    /// Upper bound on the cost of generating every description of a run
    CostEstimate(CostArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Corpus JSON file
    corpus: PathBuf,
    /// Split assignment file (JSON map of artwork id to train/val/test)
    #[arg(long)]
    splits: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Generation backend
    #[arg(long, value_parser = backend_parser())]
    backend: Option<BackendChoice>,
    /// Canned generations for the fixture backend
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Generation cache directory
    #[arg(long, env = CACHE_DIR_ENV)]
    cache_dir: Option<PathBuf>,
    /// Call the backend even when a cached generation exists
    #[arg(long)]
    no_cache: bool,
    /// Model name sent to the backend
    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run config file (TOML or JSON); flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus JSON file
    #[arg(long, required_unless_present = "config")]
    corpus: Option<PathBuf>,
    /// Split assignment file
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Prompt template
    #[arg(long, value_parser = mode_parser())]
    mode: Option<PipelineMode>,
    #[command(flatten)]
    gen: GenArgs,
    /// Directory that receives runs/<id>/
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent generation requests
    #[arg(long)]
    parallelism: Option<usize>,
    /// Fail the run when more than this fraction of artworks fail
    #[arg(long)]
    max_failure_fraction: Option<f64>,
    /// Format of the table printed on standard output
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct QaArgs {
    /// Answer extractor
    #[arg(long, value_parser = qa_parser())]
    qa: Option<QaBackendKind>,
    /// Question kinds to evaluate, comma separated
    #[arg(long, value_delimiter = ',', value_parser = kind_parser())]
    kinds: Option<Vec<QaKind>>,
}

#[derive(Debug, Args)]
struct EvalQaArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    qa: QaArgs,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Corpus JSON file
    #[arg(long)]
    corpus: PathBuf,
    /// Split assignment file
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Prompt template
    #[arg(long, value_parser = mode_parser(), default_value = "general")]
    mode: PipelineMode,
    #[command(flatten)]
    gen: GenArgs,
    /// Concurrent generation requests
    #[arg(long, default_value_t = RunOptions::default().parallelism)]
    parallelism: usize,
}

#[derive(Debug, Args)]
struct AskArgs {
    /// Artwork id
    #[arg(long)]
    artwork: String,
    /// Question about the artwork
    #[arg(long)]
    question: String,
    /// Prompt template
    #[arg(long, value_parser = mode_parser(), default_value = "general")]
    mode: PipelineMode,
    /// Corpus JSON file
    #[arg(long, default_value = DEFAULT_CORPUS)]
    corpus: PathBuf,
    #[command(flatten)]
    gen: GenArgs,
    /// Answer extractor
    #[arg(long, value_parser = qa_parser(), default_value = "lexical")]
    qa: QaBackendKind,
    /// Output format (text or json)
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Address to listen on
    #[arg(long, env = BIND_ENV, default_value = DEFAULT_BIND)]
    bind: SocketAddr,
    /// Corpus JSON file; /artworks answers 503 without one
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    gen: GenArgs,
    /// Allowed CORS origin (repeatable); any origin when absent
    #[arg(long)]
    cors_origin: Vec<String>,
}

#[derive(Debug, Args)]
struct CacheArgs {
    /// Generation cache directory
    #[arg(long, env = CACHE_DIR_ENV, default_value = DEFAULT_CACHE_DIR)]
    cache_dir: PathBuf,
    /// Output format (text or json)
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Debug, Args)]
struct CostArgs {
    /// Corpus JSON file
    #[arg(long)]
    corpus: PathBuf,
    /// Split assignment file
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Prompt template
    #[arg(long, value_parser = mode_parser(), default_value = "general")]
    mode: PipelineMode,
    /// Pricing table (TOML or JSON)
    #[arg(long)]
    pricing: PathBuf,
    /// Model to price
    #[arg(long)]
    model: Option<String>,
    /// Output format (text or json)
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

/// A failed command: message for standard error plus exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn backend(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let code = match e {
            CorpusError::Validation(_) | CorpusError::Parse { .. } => 3,
            _ => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Corpus(c) => c.into(),
            PipelineError::Prompt(p) => CliError::usage(p.to_string()),
            PipelineError::Generation(_) | PipelineError::Qa(_) => CliError::backend(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Corpus(c) => c.into(),
            ExperimentError::Pipeline(p) => p.into(),
            other if other.is_backend_failure() => CliError::backend(other.to_string()),
            other => CliError::usage(other.to_string()),
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Validate(a) => validate(a, out),
        Command::Generate(a) => generate(a, out),
        Command::Ask(a) => ask(a, out),
        Command::EvalCaptions(a) => eval(a, None, out),
        Command::EvalQa(a) => eval(a.run, Some(a.qa), out),
        Command::Serve(a) => serve(a),
        Command::CacheStats(a) => cache_stats(a, out),
        Command::CacheClear(a) => cache_clear(a, out),
        Command::CostEstimate(a) => cost_estimate(a, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::usage(e.to_string())
}

fn load(corpus: &Path, splits: Option<&Path>) -> Result<Corpus, CliError> {
    let corpus = load_corpus(corpus)?;
    Ok(match splits {
        Some(path) => corpus.with_splits(load_split_file(path)?)?,
        None => corpus,
    })
}

struct Backend {
    backend: Box<dyn GenerationBackend>,
    cache: Option<Cache>,
    model: Option<String>,
}

impl Backend {
    fn generator(&self) -> Generator<'_> {
        let mut g = Generator::new(self.backend.as_ref(), self.cache.as_ref());
        g.model_name = self.model.as_deref();
        g
    }
}

fn build_backend(
    gen: &GenArgs,
    fallback_backend: BackendChoice,
    fallback_fixtures: Option<&Path>,
    fallback_cache: Option<&Path>,
    fallback_model: Option<&str>,
) -> Result<Backend, CliError> {
    let choice = gen.backend.unwrap_or(fallback_backend);
    let fixtures = gen.fixtures.as_deref().or(fallback_fixtures);
    let backend = choice.build(fixtures).map_err(CliError::usage)?;
    let cache = if gen.no_cache {
        None
    } else {
        let dir = gen.cache_dir.as_deref().or(fallback_cache).unwrap_or(Path::new(DEFAULT_CACHE_DIR));
        Some(Cache::open(dir).map_err(|e| CliError::usage(format!("cannot open cache {}: {e}", dir.display())))?)
    };
    let model = gen.model.clone().or(fallback_model.map(str::to_owned));
    Ok(Backend { backend, cache, model })
}

fn qa_engine(kind: QaBackendKind) -> Result<QaEngine, CliError> {
    match kind {
        QaBackendKind::Lexical => Ok(QaEngine::Lexical),
        QaBackendKind::Remote => RemoteQa::from_env(REMOTE_QA_TIMEOUT)
            .map(QaEngine::Remote)
            .ok_or_else(|| CliError::usage(format!("{} is not set", artqa::qa::QA_BASE_ENV))),
    }
}

fn validate(a: ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_corpus(&a.corpus).and_then(|c| match &a.splits {
        Some(path) => c.with_splits(load_split_file(path)?),
        None => Ok(c),
    });
    match loaded {
        Ok(corpus) => {
            let kinds: Vec<QaKind> = corpus.records().iter().flat_map(|r| r.questions.iter().map(|q| q.kind)).collect();
            let visual = kinds.iter().filter(|k| **k == QaKind::Visual).count();
            writeln!(
                out,
                "ok: {} records, {} questions ({} visual, {} contextual)",
                corpus.len(),
                kinds.len(),
                visual,
                kinds.len() - visual
            )
            .map_err(io_err)
        }
        Err(CorpusError::Validation(problems)) => {
            let mut message = format!("{} is invalid:", a.corpus.display());
            for p in problems {
                message.push_str(&format!("\n  - {p}"));
            }
            Err(CliError::usage(message))
        }
        Err(other) => Err(CliError::usage(other.to_string())),
    }
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = load(&a.corpus, a.splits.as_deref())?;
    let backend = build_backend(&a.gen, BackendChoice::Remote, None, None, None)?;
    let options = RunOptions { parallelism: a.parallelism.max(1), ..RunOptions::default() };
    let exp = Experiment::new(&corpus, backend.generator(), options);
    let (stats, failures) = exp.warm(a.mode)?;
    writeln!(
        out,
        "generations: {}\nbackend calls: {}\ncache hits: {}\nfailures: {}",
        stats.generations,
        stats.backend_calls,
        stats.cache_hits,
        failures.len()
    )
    .map_err(io_err)?;
    if let Some((id, first)) = failures.first() {
        for (id, e) in &failures {
            log::warn!("{id}: {e}");
        }
        return Err(CliError::backend(format!("{} generation(s) failed, first for {id}: {first}", failures.len())));
    }
    Ok(())
}

fn ask(a: AskArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = load(&a.corpus, None)?;
    let backend = build_backend(&a.gen, BackendChoice::Fixture, Some(Path::new(DEFAULT_FIXTURES)), None, None)?;
    let engine = qa_engine(a.qa)?;
    let idf = reference_idf(corpus.test_records()).map_err(|e| CliError::usage(e.to_string()))?;
    let answer = pipeline::ask(&corpus, backend.generator(), &engine, &idf, &a.artwork, &a.question, a.mode)?;
    let text = match a.format {
        OutputFormat::Json => {
            let value = serde_json::json!({
                "answer": answer.span.text,
                "span": [answer.span.char_start, answer.span.char_end],
                "context": answer.context,
                "mode": answer.mode,
                "cached": answer.cached,
            });
            format!("{}\n", serde_json::to_string_pretty(&value).expect("json"))
        }
        _ => format!(
            "answer:  {}\nspan:    {}..{}\ncontext: {}\n",
            answer.span.text, answer.span.char_start, answer.span.char_end, answer.context
        ),
    };
    out.write_all(text.as_bytes()).map_err(io_err)
}

fn run_config(a: &RunArgs, qa: Option<&QaArgs>) -> Result<RunConfig, CliError> {
    let mut cfg = match (&a.config, &a.corpus) {
        (Some(path), _) => RunConfig::load(path).map_err(CliError::usage)?,
        (None, Some(corpus)) => RunConfig::new(corpus),
        (None, None) => return Err(CliError::usage("--corpus is required")),
    };
    if let Some(c) = &a.corpus {
        cfg.corpus = c.clone();
    }
    if a.splits.is_some() {
        cfg.splits = a.splits.clone();
    }
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(b) = a.gen.backend {
        cfg.backend = b;
    }
    if a.gen.fixtures.is_some() {
        cfg.fixtures = a.gen.fixtures.clone();
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    if let Some(p) = a.parallelism {
        cfg.parallelism = p;
    }
    if let Some(f) = a.max_failure_fraction {
        cfg.max_failure_fraction = f;
    }
    if let Some(qa) = qa {
        if let Some(k) = qa.qa {
            cfg.qa = k;
        }
        if let Some(kinds) = &qa.kinds {
            cfg.kinds = kinds.clone();
        }
    }
    cfg.validate().map_err(CliError::usage)?;
    Ok(cfg)
}

fn eval(a: RunArgs, qa: Option<QaArgs>, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = run_config(&a, qa.as_ref())?;
    let corpus = load(&cfg.corpus, cfg.splits.as_deref())?;
    let backend =
        build_backend(&a.gen, cfg.backend, cfg.fixtures.as_deref(), cfg.cache_dir.as_deref(), cfg.model.as_deref())?;
    let exp = Experiment::new(&corpus, backend.generator(), cfg.options());
    let run = match qa {
        Some(_) => exp.run_qa_eval(cfg.mode, &qa_engine(cfg.qa)?, &cfg.kinds)?,
        None => exp.run_caption_eval(cfg.mode)?,
    };
    let dir = write_run(&cfg.out, &run.report, &run.manifest).map_err(|e| CliError::usage(e.to_string()))?;
    if run.manifest.stats.failures > 0 {
        log::warn!("{} artwork(s) failed; see {}", run.manifest.stats.failures, dir.join("manifest.json").display());
    }
    let format = match a.format {
        OutputFormat::Json => ReportFormat::Json,
        OutputFormat::Csv => ReportFormat::Csv,
        OutputFormat::Text | OutputFormat::Markdown => ReportFormat::Markdown,
    };
    let table = render(&run.report, format).map_err(|e| CliError::usage(e.to_string()))?;
    out.write_all(table.as_bytes()).map_err(io_err)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let backend = build_backend(&a.gen, BackendChoice::Remote, None, None, None)?;
    let mut state = AppState::new(Arc::from(backend.backend));
    if let Some(cache) = backend.cache {
        state = state.with_cache(cache);
    }
    if let Some(path) = &a.corpus {
        state = state.with_corpus(load(path, None)?);
    }
    if let Some(qa) = RemoteQa::from_env(REMOTE_QA_TIMEOUT) {
        state = state.with_remote_qa(qa);
    }
    let config = ServerConfig { cors_origins: a.cors_origin, ..ServerConfig::default() };
    let app = artqa_server::router(state, &config);
    let runtime = tokio::runtime::Runtime::new().map_err(io_err)?;
    runtime
        .block_on(artqa_server::serve(a.bind, app))
        .map_err(|e| CliError::usage(format!("cannot serve on {}: {e}", a.bind)))
}

fn cache_stats(a: CacheArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let stats = Cache::open(&a.cache_dir).and_then(|c| c.stats()).map_err(io_err)?;
    let text = match a.format {
        OutputFormat::Json => format!("{}\n", serde_json::to_string(&stats).expect("json")),
        _ => format!("entries: {}\nbytes: {}\n", stats.entries, stats.bytes),
    };
    out.write_all(text.as_bytes()).map_err(io_err)
}

fn cache_clear(a: CacheArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let removed = Cache::open(&a.cache_dir).and_then(|c| c.clear()).map_err(io_err)?;
    let text = match a.format {
        OutputFormat::Json => format!("{}\n", serde_json::json!({ "removed": removed })),
        _ => format!("removed {removed} entries\n"),
    };
    out.write_all(text.as_bytes()).map_err(io_err)
}

fn cost_estimate(a: CostArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let corpus = load(&a.corpus, a.splits.as_deref())?;
    let pricing = Pricing::load(&a.pricing).map_err(|e| CliError::usage(e.to_string()))?;
    // never called; only identifies the requests
    let backend = RemoteBackend::from_env();
    let mut generator = Generator::new(&backend, None);
    generator.model_name = a.model.as_deref();
    let requests = Experiment::new(&corpus, generator, RunOptions::default()).planned_requests(a.mode)?;
    let mut total = 0.0;
    let mut prompt_tokens = 0u64;
    let mut completion_tokens = 0u64;
    for req in &requests {
        total += estimate_cost(req, &pricing).map_err(|e| CliError::usage(e.to_string()))?;
        prompt_tokens += approx_token_count(&req.prompt_text());
        completion_tokens += u64::from(req.decoding.max_tokens);
    }
    let model = generator.decoding(a.mode).model_name;
    let text = match a.format {
        OutputFormat::Json => format!(
            "{}\n",
            serde_json::json!({
                "model": model,
                "requests": requests.len(),
                "approx_prompt_tokens": prompt_tokens,
                "max_completion_tokens": completion_tokens,
                "upper_bound": total,
            })
        ),
        _ => format!(
            "model: {model}\nrequests: {}\nprompt tokens (approx.): {prompt_tokens}\nmax completion tokens: {completion_tokens}\nupper bound: {total:.6}\n",
            requests.len()
        ),
    };
    out.write_all(text.as_bytes()).map_err(io_err)
}
