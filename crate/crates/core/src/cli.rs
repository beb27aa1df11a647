//! Command-line surface: `score`, `evaluate`, `analyze`, `convert`, `cache`
//! and `health`.
//!
//! Exit codes: 0 ok, 1 usage, 2 data error, 3 scorer-service error.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{
    fulldoc, infuse_k, infuse_sentence, sentli, summac_zs, Aggregator, RetrievalConfig,
    RetrievalTrace, DEFAULT_TOKEN_BUDGET, SENTLI_DEFAULT_K,
};
use crate::analysis::{
    corpus_stats, greedy_fusion, overlap_probe, premise_size_sweep, CorpusStats, FusionTable,
};
use crate::domain::{BenchmarkExample, FaithfulLabel, Summary};
use crate::error::{AlgoError, EvalError, IngestError, ScorerError};
use crate::ingest::{
    self, convert_aggrefact_csv, convert_diversumm, DatasetFormat, DiverSummOptions,
};
use crate::metaeval::{
    compare_samples, error_type_histogram, roc_auc, summarize_counts, BootstrapConfig, EvalReport,
    PairwiseResult, ScoredExample, SentenceRecord, SentenceStatus, SystemResult, DEFAULT_BINS,
    DEFAULT_FRACTION, DEFAULT_ROUNDS, DEFAULT_SEED, REPORT_SCHEMA,
};
use crate::scorer::{
    CacheStore, CachedScorer, LexicalScorer, NliScorer, RemoteConfig, RemoteScorer, ScorerStats,
    TableScorer, DEFAULT_SERVICE_URL_ENV,
};
use crate::splitting::{
    infuse_sub, split_summary, CachedSplitter, IdentitySplitter, RemoteSplitter, Splitter,
    TableSplitter,
};

pub const NLI_CACHE_FILE: &str = "nli-cache.tsv";
pub const SPLIT_CACHE_FILE: &str = "split-cache.tsv";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Service(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Service(_) => 3,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScorerError> for CliError {
    fn from(e: ScorerError) -> Self {
        CliError::Service(e.to_string())
    }
}

impl From<AlgoError> for CliError {
    fn from(e: AlgoError) -> Self {
        match e {
            AlgoError::Scorer(e) => e.into(),
            AlgoError::ZeroK | AlgoError::ZeroBudget => CliError::Usage(e.to_string()),
            AlgoError::EmptyScores => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

#[derive(Debug, Parser)]
#[command(
    name = "infuse",
    version,
    about = "Summary faithfulness scoring and meta-evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every example with the selected systems.
    Score(ScoreArgs),
    /// Compute ROC-AUC, bootstrap significance and histograms from score files.
    Evaluate(EvaluateArgs),
    /// Corpus statistics, sentence fusion and overlap tables.
    Analyze(AnalyzeArgs),
    /// Convert a benchmark release file to canonical JSONL.
    Convert(ConvertArgs),
    /// Inspect or clear the on-disk caches.
    Cache(CacheArgs),
    /// Check that the model server is up.
    Health(HealthArgs),
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum System {
    #[value(name = "infuse")]
    Infuse,
    #[value(name = "infuse_sub")]
    InfuseSub,
    #[value(name = "infuse_k")]
    InfuseK,
    #[value(name = "fulldoc")]
    #[serde(rename = "fulldoc")]
    FullDoc,
    #[value(name = "summac_zs")]
    SummacZs,
    #[value(name = "sentli")]
    Sentli,
}

impl System {
    pub const ALL: [System; 6] = [
        System::Infuse,
        System::InfuseSub,
        System::InfuseK,
        System::FullDoc,
        System::SummacZs,
        System::Sentli,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            System::Infuse => "infuse",
            System::InfuseSub => "infuse_sub",
            System::InfuseK => "infuse_k",
            System::FullDoc => "fulldoc",
            System::SummacZs => "summac_zs",
            System::Sentli => "sentli",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Canonical,
    Aggrefact,
    Diversumm,
}

/// `lexical`, `remote` (URL from the environment), `remote:URL` or `fake:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerSpec {
    Lexical,
    Remote(Option<String>),
    Fake(PathBuf),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "lexical" => Ok(ScorerSpec::Lexical),
            _ if s == "remote" => Ok(ScorerSpec::Remote(None)),
            Some(("remote", url)) if !url.is_empty() => {
                Ok(ScorerSpec::Remote(Some(url.to_owned())))
            }
            Some(("fake", path)) if !path.is_empty() => Ok(ScorerSpec::Fake(path.into())),
            _ => Err(format!(
                "unknown scorer `{s}`; expected lexical, remote[:URL] or fake:PATH"
            )),
        }
    }
}

/// `identity`, `remote` (URL from the environment), `remote:URL` or `fake:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitterSpec {
    Identity,
    Remote(Option<String>),
    Fake(PathBuf),
}

impl FromStr for SplitterSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "identity" => Ok(SplitterSpec::Identity),
            _ if s == "remote" => Ok(SplitterSpec::Remote(None)),
            Some(("remote", url)) if !url.is_empty() => {
                Ok(SplitterSpec::Remote(Some(url.to_owned())))
            }
            Some(("fake", path)) if !path.is_empty() => Ok(SplitterSpec::Fake(path.into())),
            _ => Err(format!(
                "unknown splitter `{s}`; expected identity, remote[:URL] or fake:PATH"
            )),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "canonical")]
    pub format: InputFormat,
    /// Drop DiverSumm-style records whose summary and sentence labels disagree.
    #[arg(long)]
    pub exclude_mismatched: bool,
}

impl DatasetArgs {
    pub fn load(&self) -> Result<Vec<BenchmarkExample>, CliError> {
        let format = match self.format {
            InputFormat::Canonical => DatasetFormat::Canonical,
            InputFormat::Aggrefact => DatasetFormat::AggreFactCsv,
            InputFormat::Diversumm => DatasetFormat::DiverSumm(DiverSummOptions {
                exclude_mismatched: self.exclude_mismatched,
            }),
        };
        let examples = ingest::load_dataset(&self.dataset, format)?;
        if examples.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no examples",
                self.dataset.display()
            )));
        }
        Ok(examples)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScorerArgs {
    /// lexical | remote[:URL] | fake:PATH
    #[arg(long, default_value = "lexical")]
    pub scorer: ScorerSpec,
    /// Model-server URL used by `remote` without an explicit URL.
    #[arg(long, env = DEFAULT_SERVICE_URL_ENV)]
    pub service_url: Option<String>,
    /// Directory for the persistent NLI and split caches.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads for per-example scoring.
    #[arg(long, default_value_t = default_jobs())]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, Args)]
pub struct RetrievalArgs {
    /// Retrieval size for infuse_k and per-list size for sentli.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
    pub max_premise_tokens: usize,
    #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
    pub chunk_budget: usize,
    /// Rank by forward entailment only.
    #[arg(long)]
    pub no_reverse: bool,
}

impl RetrievalArgs {
    pub fn config(&self) -> Result<RetrievalConfig, CliError> {
        let config = RetrievalConfig {
            fixed_k: self.k,
            max_premise_tokens: self.max_premise_tokens,
            use_reverse: !self.no_reverse,
            chunk_budget: self.chunk_budget,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "infuse,infuse_sub,infuse_k,fulldoc,summac_zs,sentli"
    )]
    pub systems: Vec<System>,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// identity | remote[:URL] | fake:PATH
    #[arg(long, default_value = "identity")]
    pub splitter: SplitterSpec,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Recorded in run.json and used as the default evaluation seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory for scores.jsonl, traces.jsonl and run.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Score files written by `score`; a run.json next to a file adds its scorer stats.
    #[arg(long, required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Bootstrap seed; defaults to the seed in the first run.json found, else 42.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    pub bootstrap_rounds: usize,
    #[arg(long, default_value_t = DEFAULT_FRACTION)]
    pub bootstrap_fraction: f64,
    /// Resample with replacement instead of subsampling.
    #[arg(long)]
    pub with_replacement: bool,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one histogram CSV per system into this directory.
    #[arg(long)]
    pub histogram_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub retrieval: RetrievalArgs,
    /// Premise sizes for the fixed-k sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub ks: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Canonical JSONL output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CacheArgs {
    #[arg(long)]
    pub cache_dir: PathBuf,
    /// Remove all cached entries.
    #[arg(long)]
    pub clear: bool,
}

#[derive(Debug, Clone, Args)]
pub struct HealthArgs {
    #[arg(long, env = DEFAULT_SERVICE_URL_ENV)]
    pub service_url: Option<String>,
}

/// Parse `args` (program name first), run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(args) => cmd_score(&args).map(|summary| eprint!("{}", summary.render())),
        Command::Evaluate(args) => {
            let report = cmd_evaluate(&args)?;
            match &args.out {
                Some(path) => {
                    write_file(path, &report.to_json())?;
                    print!("{}", report.render_tables());
                }
                None => print!("{}", report.to_json()),
            }
            Ok(())
        }
        Command::Analyze(args) => cmd_analyze(&args).map(|written| {
            for path in written {
                eprintln!("wrote {}", path.display());
            }
        }),
        Command::Convert(args) => cmd_convert(&args).map(|n| eprintln!("wrote {n} examples")),
        Command::Cache(args) => cmd_cache(&args).map(|msg| println!("{msg}")),
        Command::Health(args) => cmd_health(&args).map(|msg| println!("{msg}")),
    }
}

fn service_url(explicit: &Option<String>, fallback: &Option<String>) -> Result<String, CliError> {
    explicit
        .clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| {
            CliError::Usage(format!(
                "no service URL; pass remote:URL or set {DEFAULT_SERVICE_URL_ENV}"
            ))
        })
}

/// Build the base scorer. Remote scorers are health-checked here.
pub fn build_scorer(args: &ScorerArgs) -> Result<Arc<dyn NliScorer>, CliError> {
    Ok(match &args.scorer {
        ScorerSpec::Lexical => Arc::new(LexicalScorer::new()),
        ScorerSpec::Remote(url) => {
            let url = service_url(url, &args.service_url)?;
            Arc::new(
                RemoteScorer::connect(RemoteConfig::new(&url))
                    .map_err(|e| CliError::Service(format!("health check of {url} failed: {e}")))?,
            )
        }
        ScorerSpec::Fake(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let id = format!("fake:{}", path.display());
            Arc::new(TableScorer::from_jsonl(id, &text).map_err(|e| CliError::Data(e.to_string()))?)
        }
    })
}

pub fn build_splitter(
    spec: &SplitterSpec,
    args: &ScorerArgs,
) -> Result<Box<dyn Splitter>, CliError> {
    let inner: Box<dyn Splitter> = match spec {
        SplitterSpec::Identity => return Ok(Box::new(IdentitySplitter)),
        SplitterSpec::Remote(url) => {
            let url = service_url(url, &args.service_url)?;
            Box::new(
                RemoteSplitter::connect(RemoteConfig::new(&url))
                    .map_err(|e| CliError::Service(format!("health check of {url} failed: {e}")))?,
            )
        }
        SplitterSpec::Fake(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let id = format!("fake:{}", path.display());
            Box::new(
                TableSplitter::from_jsonl(id, &text).map_err(|e| CliError::Data(e.to_string()))?,
            )
        }
    };
    Ok(match &args.cache_dir {
        Some(dir) => {
            create_dir(dir)?;
            Box::new(CachedSplitter::open(inner, &dir.join(SPLIT_CACHE_FILE)))
        }
        None => Box::new(CachedSplitter::in_memory(inner)),
    })
}

fn cache_store(args: &ScorerArgs) -> Result<Arc<CacheStore>, CliError> {
    Ok(Arc::new(match &args.cache_dir {
        Some(dir) => {
            create_dir(dir)?;
            CacheStore::open(&dir.join(NLI_CACHE_FILE))
        }
        None => CacheStore::in_memory(),
    }))
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

/// One line of `scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub example_id: String,
    pub system_id: String,
    pub score: f64,
    pub label: FaithfulLabel,
    /// One score per summary sentence.
    pub sentence_scores: Vec<f64>,
    /// Human sentence annotations, when the dataset has them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_status: Option<Vec<SentenceStatus>>,
    /// Document sentences in each premise, for retrieval-based systems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved: Option<Vec<usize>>,
}

impl ScoreRecord {
    pub fn scored(&self) -> ScoredExample {
        ScoredExample {
            example_id: self.example_id.clone(),
            system_id: self.system_id.clone(),
            score: self.score,
            label: self.label,
        }
    }
}

/// One line of `traces.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub example_id: String,
    pub system_id: String,
    pub sentence: usize,
    /// Sub-sentence position; always 0 for whole-sentence retrieval.
    pub part: usize,
    pub trace: RetrievalTrace,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: PathBuf,
    pub examples: usize,
    pub systems: Vec<System>,
    pub scorer: String,
    pub splitter: String,
    pub retrieval: RetrievalConfig,
    pub seed: u64,
    pub jobs: usize,
    pub stats: BTreeMap<String, ScorerStats>,
    /// Summary sentences the splitter output was rejected for.
    pub split_warnings: usize,
}

/// What `score` produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub out: PathBuf,
    pub manifest: RunManifest,
    pub records: Vec<ScoreRecord>,
}

impl ScoreSummary {
    pub fn render(&self) -> String {
        let mut s = format!(
            "{} examples, scorer {}, output in {}\n",
            self.manifest.examples,
            self.manifest.scorer,
            self.out.display()
        );
        for (system, st) in &self.manifest.stats {
            s.push_str(&format!(
                "{system:<12} calls {:>8}  cache hits {:>8}  batches {:>6}\n",
                st.total_calls, st.cache_hits, st.batch_count
            ));
        }
        s
    }
}

fn sentence_status(ex: &BenchmarkExample) -> Option<Vec<SentenceStatus>> {
    let labels = ex.sentence_labels()?;
    Some(
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| match l {
                FaithfulLabel::Faithful => SentenceStatus::Faithful,
                FaithfulLabel::Unfaithful => SentenceStatus::Unfaithful(
                    ex.sentence_errors()
                        .map(|e| e[i].clone())
                        .unwrap_or_default(),
                ),
            })
            .collect(),
    )
}

/// Score one example with one system.
pub fn score_example(
    system: System,
    ex: &BenchmarkExample,
    split: Option<&Summary>,
    scorer: &dyn NliScorer,
    config: &RetrievalConfig,
) -> Result<(ScoreRecord, Vec<TraceRecord>), AlgoError> {
    let doc = &ex.document;
    let k = config.fixed_k.unwrap_or(SENTLI_DEFAULT_K);
    let mut traces = Vec::new();
    let mut trace = |sentence: usize, part: usize, t: RetrievalTrace| {
        traces.push(TraceRecord {
            example_id: ex.id.clone(),
            system_id: system.as_str().into(),
            sentence,
            part,
            trace: t,
        })
    };
    let mut retrieved = Vec::new();
    let (score, sentence_scores) = match system {
        System::FullDoc => {
            let r = fulldoc(doc, &ex.summary, scorer, config.chunk_budget)?;
            (r.summary_score, r.sentence_scores)
        }
        System::InfuseSub => {
            let summary = split.unwrap_or(&ex.summary);
            let mut scores = Vec::with_capacity(summary.len());
            for (i, unit) in summary.units().iter().enumerate() {
                let (s, ts) = infuse_sub(doc, unit, scorer, config, Aggregator::Min)?;
                for (p, t) in ts.into_iter().enumerate() {
                    retrieved.push(t.selected_count);
                    trace(i, p, t);
                }
                scores.push(s);
            }
            (crate::algorithms::aggregate_summary(&scores)?, scores)
        }
        _ => {
            let mut scores = Vec::with_capacity(ex.summary.len());
            for (i, s) in ex.summary.sentences().enumerate() {
                let score = match system {
                    System::Infuse => {
                        let (score, t) = infuse_sentence(doc, s, scorer, config)?;
                        retrieved.push(t.selected_count);
                        trace(i, 0, t);
                        score
                    }
                    System::InfuseK => {
                        let (score, idx) = infuse_k(doc, s, scorer, k, config.use_reverse)?;
                        retrieved.push(idx.len());
                        score
                    }
                    System::Sentli => {
                        let r = sentli(doc, s, scorer, k)?;
                        retrieved.push(r.context.len());
                        r.score
                    }
                    System::SummacZs => summac_zs(doc, s, scorer)?.score,
                    System::FullDoc | System::InfuseSub => unreachable!(),
                };
                scores.push(score);
            }
            (crate::algorithms::aggregate_summary(&scores)?, scores)
        }
    };
    let record = ScoreRecord {
        example_id: ex.id.clone(),
        system_id: system.as_str().into(),
        score,
        label: ex.label,
        sentence_scores,
        sentence_status: sentence_status(ex),
        retrieved: (!retrieved.is_empty()).then_some(retrieved),
    };
    Ok((record, traces))
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Run the scoring step and write `scores.jsonl`, `traces.jsonl` and `run.json`.
pub fn cmd_score(args: &ScoreArgs) -> Result<ScoreSummary, CliError> {
    if args.systems.is_empty() {
        return Err(CliError::Usage("at least one system is required".into()));
    }
    let mut systems: Vec<System> = Vec::new();
    for &s in &args.systems {
        if !systems.contains(&s) {
            systems.push(s);
        }
    }
    let config = args.retrieval.config()?;
    let pool = thread_pool(args.scorer.jobs)?;
    let examples = args.dataset.load()?;
    let base = build_scorer(&args.scorer)?;
    let store = cache_store(&args.scorer)?;

    let (splits, splitter_id, split_warnings) = if systems.contains(&System::InfuseSub) {
        let splitter = build_splitter(&args.splitter, &args.scorer)?;
        let results: Vec<_> = pool.install(|| {
            examples
                .par_iter()
                .map(|ex| split_summary(&ex.summary, &splitter))
                .collect()
        });
        let warnings = results
            .iter()
            .flat_map(|(_, r)| r)
            .filter(|r| r.warning.is_some())
            .count();
        let splits: Vec<Summary> = results.into_iter().map(|(s, _)| s).collect();
        (Some(splits), splitter.id().to_owned(), warnings)
    } else {
        (None, "none".to_owned(), 0)
    };

    let mut records = Vec::new();
    let mut traces = Vec::new();
    let mut stats = BTreeMap::new();
    for &system in &systems {
        let view = CachedScorer::new(Arc::clone(&base), Arc::clone(&store));
        let results: Vec<(ScoreRecord, Vec<TraceRecord>)> = pool
            .install(|| {
                examples
                    .par_iter()
                    .enumerate()
                    .map(|(i, ex)| {
                        let split = splits.as_ref().map(|s| &s[i]);
                        score_example(system, ex, split, &view, &config)
                            .map_err(|e| (ex.id.clone(), e))
                    })
                    .collect::<Result<_, _>>()
            })
            .map_err(|(id, e)| {
                let err = CliError::from(e);
                match err {
                    CliError::Service(m) => CliError::Service(format!("{system} on {id}: {m}")),
                    CliError::Data(m) => CliError::Data(format!("{system} on {id}: {m}")),
                    other => other,
                }
            })?;
        for (r, t) in results {
            records.push(r);
            traces.extend(t);
        }
        stats.insert(system.as_str().to_owned(), view.stats());
    }

    let manifest = RunManifest {
        dataset: args.dataset.dataset.clone(),
        examples: examples.len(),
        systems,
        scorer: base.id().to_owned(),
        splitter: splitter_id,
        retrieval: config,
        seed: args.seed,
        jobs: args.scorer.jobs,
        stats,
        split_warnings,
    };
    create_dir(&args.out)?;
    write_file(&args.out.join(SCORES_FILE), &to_jsonl(&records))?;
    write_file(&args.out.join(TRACES_FILE), &to_jsonl(&traces))?;
    let mut run = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    run.push('\n');
    write_file(&args.out.join(RUN_FILE), &run)?;
    Ok(ScoreSummary {
        out: args.out.clone(),
        manifest,
        records,
    })
}

/// Read a `scores.jsonl` file.
pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Data(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn read_manifest(scores: &Path) -> Result<Option<RunManifest>, CliError> {
    let path = scores.with_file_name(RUN_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Build the report from already loaded score records. Systems appear in
/// first-seen order.
pub fn evaluate_records(
    records: &[ScoreRecord],
    bootstrap: &BootstrapConfig,
    bins: usize,
    stats: &BTreeMap<String, ScorerStats>,
) -> Result<EvalReport, CliError> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_system: HashMap<&str, BTreeMap<&str, &ScoreRecord>> = HashMap::new();
    for r in records {
        let entry = by_system.entry(r.system_id.as_str()).or_insert_with(|| {
            order.push(r.system_id.as_str());
            BTreeMap::new()
        });
        if entry.insert(r.example_id.as_str(), r).is_some() {
            return Err(CliError::Data(format!(
                "duplicate score for example `{}` under system `{}`",
                r.example_id, r.system_id
            )));
        }
    }
    if order.is_empty() {
        return Err(CliError::Data("no scores".into()));
    }

    let all_ids: BTreeSet<&str> = records.iter().map(|r| r.example_id.as_str()).collect();
    let mut diff = Vec::new();
    for &system in &order {
        let have = &by_system[system];
        let missing: Vec<&str> = all_ids
            .iter()
            .copied()
            .filter(|id| !have.contains_key(id))
            .collect();
        if !missing.is_empty() {
            diff.push(format!("{system} is missing {}", missing.join(", ")));
        }
    }
    if !diff.is_empty() {
        return Err(CliError::Data(format!(
            "misaligned score files: {}",
            diff.join("; ")
        )));
    }

    let ids: Vec<&str> = all_ids.into_iter().collect();
    let first = &by_system[order[0]];
    let labels: Vec<FaithfulLabel> = ids.iter().map(|id| first[id].label).collect();
    for &system in &order[1..] {
        for (i, id) in ids.iter().enumerate() {
            if by_system[system][id].label != labels[i] {
                return Err(CliError::Data(format!(
                    "label of `{id}` differs between {} and {system}",
                    order[0]
                )));
            }
        }
    }

    let mut systems = Vec::new();
    let mut histograms = BTreeMap::new();
    let mut skipped_histograms = false;
    for &system in &order {
        let recs: Vec<&ScoreRecord> = ids.iter().map(|id| by_system[system][id]).collect();
        let scores: Vec<f64> = recs.iter().map(|r| r.score).collect();
        let auc = roc_auc(&scores, &labels)?;
        let bootstrap_auc = bootstrap.resampled_auc(&scores, &labels)?;
        let retrieved = recs
            .iter()
            .map(|r| r.retrieved.as_deref())
            .collect::<Option<Vec<_>>>()
            .and_then(|all| summarize_counts(&all.concat()));

        let sentence_records: Option<Vec<SentenceRecord>> = recs
            .iter()
            .map(|r| {
                let status = r.sentence_status.as_ref()?;
                (status.len() == r.sentence_scores.len()).then(|| {
                    r.sentence_scores
                        .iter()
                        .zip(status)
                        .map(|(&score, status)| SentenceRecord {
                            score,
                            status: status.clone(),
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat());
        match sentence_records {
            Some(sr) => {
                histograms.insert(system.to_owned(), error_type_histogram(&sr, bins)?);
            }
            None => skipped_histograms = true,
        }
        systems.push(SystemResult {
            system: system.to_owned(),
            auc,
            bootstrap_auc,
            retrieved,
            scorer_stats: stats.get(system).copied(),
        });
    }
    if skipped_histograms {
        warn!("sentence annotations missing; error-type histograms skipped for some systems");
    }

    let mut pairwise = Vec::new();
    for i in 0..systems.len() {
        for j in i + 1..systems.len() {
            let cmp = compare_samples(
                systems[i].bootstrap_auc.clone(),
                systems[j].bootstrap_auc.clone(),
            );
            pairwise.push(PairwiseResult {
                system_a: systems[i].system.clone(),
                system_b: systems[j].system.clone(),
                mean_difference: cmp.mean_difference,
                significance: cmp.significance,
            });
        }
    }
    Ok(EvalReport {
        schema: REPORT_SCHEMA.into(),
        examples: ids.len(),
        bootstrap: *bootstrap,
        systems,
        pairwise,
        histograms,
    })
}

/// Load score files and build the evaluation report.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvalReport, CliError> {
    if args.bins < 2 {
        return Err(CliError::Usage("--bins must be at least 2".into()));
    }
    let mut records = Vec::new();
    let mut stats = BTreeMap::new();
    let mut run_seed = None;
    for path in &args.scores {
        records.extend(read_scores(path)?);
        if let Some(m) = read_manifest(path)? {
            run_seed = run_seed.or(Some(m.seed));
            stats.extend(m.stats);
        }
    }
    let bootstrap = BootstrapConfig {
        fraction: args.bootstrap_fraction,
        rounds: args.bootstrap_rounds,
        seed: args.seed.or(run_seed).unwrap_or(DEFAULT_SEED),
        with_replacement: args.with_replacement,
    };
    bootstrap
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let report = evaluate_records(&records, &bootstrap, args.bins, &stats)?;
    if let Some(dir) = &args.histogram_dir {
        create_dir(dir)?;
        for (system, hist) in &report.histograms {
            write_file(&dir.join(format!("histogram_{system}.csv")), &hist.to_csv())?;
        }
    }
    Ok(report)
}

/// Tables written by `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisTables {
    pub corpus: Vec<CorpusStats>,
    pub fusion: FusionTable,
    pub zero_coverage_sentences: usize,
    /// Absent when no example has sentence labels.
    pub overlap: Option<Vec<OverlapRow>>,
    pub sweep: Option<Vec<crate::analysis::SweepPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRow {
    pub example_id: String,
    pub sentence: usize,
    pub label: FaithfulLabel,
    pub rouge2_recall: f64,
    pub entailment: f64,
    pub premise_sentences: usize,
}

/// Compute every analysis table.
pub fn analyze_examples(
    examples: &[BenchmarkExample],
    scorer: &dyn NliScorer,
    config: &RetrievalConfig,
    ks: &[usize],
) -> Result<AnalysisTables, CliError> {
    let records: Vec<_> = examples
        .par_iter()
        .flat_map_iter(|ex| {
            ex.summary
                .sentences()
                .map(|s| greedy_fusion(&ex.document, s))
                .collect::<Vec<_>>()
        })
        .collect();
    let zero = records.iter().filter(|r| r.zero_coverage).count();
    let fusion = FusionTable::from_records(records.iter().filter(|r| !r.zero_coverage));

    let labelled: Vec<&BenchmarkExample> = examples
        .iter()
        .filter(|e| e.sentence_labels().is_some())
        .collect();
    let (overlap, sweep) = if labelled.is_empty() {
        warn!("no sentence-level labels in the dataset; skipping overlap and premise-size tables");
        (None, None)
    } else {
        let rows: Vec<Vec<OverlapRow>> = labelled
            .par_iter()
            .map(|ex| {
                let points = overlap_probe(&ex.document, &ex.summary, scorer, config)?;
                Ok(points
                    .into_iter()
                    .zip(ex.sentence_labels().expect("filtered"))
                    .enumerate()
                    .map(|(i, (p, &label))| OverlapRow {
                        example_id: ex.id.clone(),
                        sentence: i,
                        label,
                        rouge2_recall: p.rouge2_recall,
                        entailment: p.entailment,
                        premise_sentences: p.premise_sentences,
                    })
                    .collect())
            })
            .collect::<Result<_, AlgoError>>()?;
        let sweep = premise_size_sweep(examples, scorer, ks, config.use_reverse)?;
        if sweep.is_empty() {
            warn!("no unfaithful sentences; premise-size sweep is empty");
        }
        (Some(rows.concat()), Some(sweep))
    };
    Ok(AnalysisTables {
        corpus: corpus_stats(examples),
        fusion,
        zero_coverage_sentences: zero,
        overlap,
        sweep,
    })
}

/// Write the analysis tables as CSV plus one combined JSON file.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Vec<PathBuf>, CliError> {
    let config = args.retrieval.config()?;
    if args.ks.contains(&0) {
        return Err(CliError::Usage("--ks values must be at least 1".into()));
    }
    let pool = thread_pool(args.scorer.jobs)?;
    let examples = args.dataset.load()?;
    let base = build_scorer(&args.scorer)?;
    let scorer = CachedScorer::new(base, cache_store(&args.scorer)?);
    let tables = pool.install(|| analyze_examples(&examples, &scorer, &config, &args.ks))?;

    create_dir(&args.out)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), CliError> {
        let path = args.out.join(name);
        write_file(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    let mut corpus = format!("{}\n", CorpusStats::CSV_HEADER);
    for row in &tables.corpus {
        corpus.push_str(&row.csv_row());
        corpus.push('\n');
    }
    emit("corpus.csv", corpus)?;
    emit("fusion.csv", tables.fusion.to_csv())?;
    if let Some(rows) = &tables.overlap {
        let mut csv =
            String::from("example_id,sentence,label,rouge2_recall,entailment,premise_sentences\n");
        for r in rows {
            csv.push_str(&format!(
                "{},{},{},{:.4},{:.4},{}\n",
                r.example_id,
                r.sentence,
                r.label.as_str(),
                r.rouge2_recall,
                r.entailment,
                r.premise_sentences
            ));
        }
        emit("overlap.csv", csv)?;
    }
    if let Some(sweep) = &tables.sweep {
        let mut csv = String::from("k,mean_entailment,sentences\n");
        for p in sweep {
            csv.push_str(&format!(
                "{},{:.4},{}\n",
                p.k, p.mean_entailment, p.sentences
            ));
        }
        emit("sweep.csv", csv)?;
    }
    let mut json = serde_json::to_string_pretty(&tables).expect("tables serialize");
    json.push('\n');
    emit("analysis.json", json)?;
    Ok(written)
}

/// Convert a dataset to canonical JSONL; returns the number of examples written.
pub fn cmd_convert(args: &ConvertArgs) -> Result<usize, CliError> {
    let d = &args.dataset;
    let examples = match d.format {
        InputFormat::Canonical => d.load()?,
        InputFormat::Aggrefact => {
            let file = fs::File::open(&d.dataset).map_err(|e| io_error(&d.dataset, e))?;
            convert_aggrefact_csv(file)?.examples
        }
        InputFormat::Diversumm => {
            let text = fs::read_to_string(&d.dataset).map_err(|e| io_error(&d.dataset, e))?;
            let conv = convert_diversumm(
                &text,
                DiverSummOptions {
                    exclude_mismatched: d.exclude_mismatched,
                },
            )?;
            if !conv.mismatched.is_empty() {
                warn!(
                    "{} examples with summary/sentence label mismatch{}",
                    conv.mismatched.len(),
                    if d.exclude_mismatched {
                        " excluded"
                    } else {
                        ""
                    }
                );
            }
            conv.examples
        }
    };
    write_file(&args.out, &ingest::write_canonical(&examples))?;
    Ok(examples.len())
}

pub fn cmd_cache(args: &CacheArgs) -> Result<String, CliError> {
    let nli = args.cache_dir.join(NLI_CACHE_FILE);
    let split = args.cache_dir.join(SPLIT_CACHE_FILE);
    if args.clear {
        for path in [&nli, &split] {
            match fs::remove_file(path) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(io_error(path, e)),
            }
        }
        return Ok(format!("cleared caches in {}", args.cache_dir.display()));
    }
    let nli_entries = if nli.exists() {
        CacheStore::open(&nli).len()
    } else {
        0
    };
    let split_entries = if split.exists() {
        CachedSplitter::open(IdentitySplitter, &split).len()
    } else {
        0
    };
    Ok(format!(
        "nli entries {nli_entries}\nsplit entries {split_entries}"
    ))
}

pub fn cmd_health(args: &HealthArgs) -> Result<String, CliError> {
    let url = service_url(&None, &args.service_url)?;
    let status = RemoteScorer::health(RemoteConfig::new(&url))?;
    Ok(format!(
        "ok\nnli model {}\nsplit model {}",
        status.nli_model.as_deref().unwrap_or("-"),
        status.split_model.as_deref().unwrap_or("-")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scorer_specs() {
        assert_eq!("lexical".parse(), Ok(ScorerSpec::Lexical));
        assert_eq!("remote".parse(), Ok(ScorerSpec::Remote(None)));
        assert_eq!(
            "remote:http://h:1".parse(),
            Ok(ScorerSpec::Remote(Some("http://h:1".into())))
        );
        assert_eq!(
            "fake:t.jsonl".parse(),
            Ok(ScorerSpec::Fake("t.jsonl".into()))
        );
        assert!("fake:".parse::<ScorerSpec>().is_err());
        assert!("gpt".parse::<ScorerSpec>().is_err());
        assert_eq!("identity".parse(), Ok(SplitterSpec::Identity));
        assert!("lexical".parse::<SplitterSpec>().is_err());
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(
            main_with_args([
                "infuse",
                "score",
                "--systems",
                "bogus",
                "--dataset",
                "x",
                "--out",
                "y"
            ]),
            1
        );
        assert_eq!(main_with_args(["infuse", "frobnicate"]), 1);
        assert_eq!(main_with_args(["infuse", "--help"]), 0);
    }

    #[test]
    fn system_names_round_trip() {
        for s in System::ALL {
            assert_eq!(<System as ValueEnum>::from_str(s.as_str(), false), Ok(s));
            assert_eq!(
                serde_json::to_string(&s).unwrap(),
                format!("\"{}\"", s.as_str())
            );
        }
    }

    fn record(system: &str, id: &str, score: f64, label: FaithfulLabel) -> ScoreRecord {
        ScoreRecord {
            example_id: id.into(),
            system_id: system.into(),
            score,
            label,
            sentence_scores: vec![score],
            sentence_status: None,
            retrieved: Some(vec![1]),
        }
    }

    #[test]
    fn misaligned_ids_are_listed() {
        use FaithfulLabel::*;
        let recs = vec![
            record("a", "1", 0.9, Faithful),
            record("a", "2", 0.1, Unfaithful),
            record("b", "1", 0.9, Faithful),
        ];
        let err =
            evaluate_records(&recs, &BootstrapConfig::default(), 10, &BTreeMap::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("b is missing 2"), "{err}");
    }
}
