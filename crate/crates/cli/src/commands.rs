use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use faqrank_core::corpus::{load_faq_corpus, load_query_set, read_run_file, validate_judgments, write_run_file};
use faqrank_core::evalkit::{
    evaluate_run, kfold_split, score_bucket_report, write_bucket_csv, FoldSplit, GainMode, SplitRatios,
};
use faqrank_core::relevance::{generate_training_pairs, write_training_examples, NegativeScope};
use faqrank_core::{
    Analyzer, DefaultAnalyzer, EvalConfig, FaqCorpus, FaqEngine, LexicalIndex, Method, OverlapScorer, PoolMode,
    QueryRecord, RelevanceScorer, RemoteScorer,
};
use serde_json::json;

use crate::config::{AppConfig, ScorerKind};
use crate::error::CliError;
use crate::service::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "faqrank", version, about = "Hybrid FAQ retrieval")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Configuration flags shared by every subcommand. Flags win over the config
/// file and the environment.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// FAQ corpus (JSONL).
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub stopwords: Option<PathBuf>,
    /// Only search entries with this source tag.
    #[arg(long, global = true)]
    pub source: Option<String>,
    #[arg(long, global = true)]
    pub bm25_k: Option<f64>,
    #[arg(long, global = true)]
    pub bm25_b: Option<f64>,
    #[arg(long, global = true)]
    pub k1: Option<f64>,
    #[arg(long, global = true)]
    pub k2: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub pool_size: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub pool_mode: Option<PoolModeArg>,
    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerKind>,
    #[arg(long, global = true)]
    pub scorer_url: Option<String>,
    #[arg(long, global = true)]
    pub scorer_timeout_ms: Option<u64>,
    #[arg(long, global = true)]
    pub scorer_max_batch: Option<usize>,
    #[arg(long, global = true)]
    pub scorer_attempts: Option<u32>,
    #[arg(long, global = true)]
    pub scorer_backoff_ms: Option<u64>,
    #[arg(long, global = true)]
    pub bind: Option<String>,
    #[arg(long, global = true)]
    pub port: Option<u16>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolModeArg {
    Union,
    #[value(alias = "bert-only")]
    RelevanceOnly,
}

impl From<PoolModeArg> for PoolMode {
    fn from(m: PoolModeArg) -> Self {
        match m {
            PoolModeArg::Union => PoolMode::Union,
            PoolModeArg::RelevanceOnly => PoolMode::RelevanceOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lexical,
    Relevance,
    Fused,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Lexical => Method::Lexical,
            MethodArg::Relevance => Method::Relevance,
            MethodArg::Fused => Method::Fused,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    Pooled,
    SameSource,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the lexical index and write a snapshot.
    Index {
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank FAQ entries for one query.
    Search {
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = service::DEFAULT_TOP_K)]
        top: usize,
        /// Load this index snapshot instead of rebuilding.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Print the same JSON body as the HTTP API.
        #[arg(long)]
        json: bool,
    },
    /// Produce run files and metric reports for a query set.
    Evaluate {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_enum, default_values_t = [MethodArg::Fused])]
        method: Vec<MethodArg>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Results kept per query.
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Split file written by `split`; evaluates the test set of `--fold`.
        #[arg(long, requires = "fold")]
        splits: Option<PathBuf>,
        #[arg(long, requires = "splits")]
        fold: Option<usize>,
        #[arg(long, value_enum, default_value_t = GainArg::Linear)]
        gain: GainArg,
    },
    /// Generate labeled training pairs with negative sampling.
    GenTraining {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = faqrank_core::relevance::DEFAULT_NEG_RATIO)]
        neg_ratio: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ScopeArg::Pooled)]
        scope: ScopeArg,
    },
    /// Write seeded k-fold train/dev/test splits of a query set.
    Split {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0.2)]
        dev_ratio: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Count top-1 correct/incorrect queries per score bucket (CSV).
    BucketReport {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])]
        edges: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    DumpConfig,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GainArg {
    Linear,
    Exponential,
}

impl Overrides {
    pub fn apply(&self, mut c: AppConfig) -> AppConfig {
        if let Some(v) = &self.corpus {
            c.corpus = Some(v.clone());
        }
        if let Some(v) = &self.stopwords {
            c.stopwords = Some(v.clone());
        }
        if let Some(v) = &self.source {
            c.source = Some(v.clone());
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v.into(); })*
            };
        }
        set!(
            bm25_k => bm25.k,
            bm25_b => bm25.b,
            k1 => normalization.k1,
            k2 => normalization.k2,
            alpha => fusion.alpha,
            t => fusion.t,
            pool_size => fusion.pool_size,
            pool_mode => fusion.pool_mode,
            scorer => scorer.kind,
            scorer_url => scorer.url,
            scorer_timeout_ms => scorer.timeout_ms,
            scorer_max_batch => scorer.max_batch,
            scorer_attempts => scorer.max_attempts,
            scorer_backoff_ms => scorer.backoff_ms,
            bind => service.bind,
            port => service.port,
        );
        c
    }
}

/// Defaults, then the config file, then the environment, then flags.
pub fn resolve_config(overrides: &Overrides) -> Result<AppConfig, CliError> {
    let base = match &overrides.config {
        Some(path) => AppConfig::from_file(path)?,
        None => AppConfig::default(),
    };
    let config = overrides.apply(base.with_env_overrides(std::env::vars())?);
    config.validate()?;
    Ok(config)
}

pub fn load_analyzer(config: &AppConfig) -> Result<Arc<dyn Analyzer>, CliError> {
    Ok(match &config.stopwords {
        Some(path) => Arc::new(DefaultAnalyzer::from_stopword_file(path).map_err(|e| CliError::Io(e.to_string()))?),
        None => Arc::new(DefaultAnalyzer::english()),
    })
}

fn corpus_path(config: &AppConfig) -> Result<&Path, CliError> {
    config
        .corpus
        .as_deref()
        .ok_or_else(|| CliError::Config("no corpus configured (use --corpus or the `corpus` key)".into()))
}

/// Loads the search corpus, restricted to the configured source if any.
pub fn load_target_corpus(config: &AppConfig) -> Result<Arc<FaqCorpus>, CliError> {
    let corpus = load_faq_corpus(corpus_path(config)?)?;
    Ok(Arc::new(match &config.source {
        Some(source) => corpus.restrict_to_source(source)?,
        None => corpus,
    }))
}

pub fn build_scorer(config: &AppConfig, analyzer: Arc<dyn Analyzer>) -> Result<Arc<dyn RelevanceScorer>, CliError> {
    Ok(match config.scorer.kind {
        ScorerKind::Builtin => Arc::new(OverlapScorer::new(analyzer)),
        ScorerKind::Remote => Arc::new(RemoteScorer::new(config.scorer.remote())?),
    })
}

pub fn build_engine(config: &AppConfig, index_path: Option<&Path>) -> Result<FaqEngine, CliError> {
    let analyzer = load_analyzer(config)?;
    let corpus = load_target_corpus(config)?;
    let scorer = build_scorer(config, analyzer.clone())?;
    let engine = match index_path {
        Some(path) => {
            let index = LexicalIndex::load(path)?;
            FaqEngine::with_index(corpus, analyzer, scorer, index, config.normalization, config.fusion)?
        }
        None => FaqEngine::build(
            corpus,
            analyzer,
            scorer,
            config.bm25,
            config.normalization,
            config.fusion,
        )?,
    };
    Ok(engine)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli.overrides)?;
    match cli.command {
        Command::Index { out } => cmd_index(&config, &out),
        Command::Search {
            query,
            top,
            index,
            json,
        } => cmd_search(&config, &query, top, index.as_deref(), json),
        Command::Evaluate {
            queries,
            method,
            out_dir,
            depth,
            splits,
            fold,
            gain,
        } => {
            let selection = splits.zip(fold);
            cmd_evaluate(&config, &queries, &method, &out_dir, depth, selection, gain)
        }
        Command::GenTraining {
            out,
            neg_ratio,
            seed,
            scope,
        } => cmd_gen_training(&config, &out, neg_ratio, seed, scope),
        Command::Split {
            queries,
            folds,
            dev_ratio,
            seed,
            out,
        } => cmd_split(&queries, folds, dev_ratio, seed, out.as_deref()),
        Command::Serve { index } => cmd_serve(config, index),
        Command::BucketReport {
            run,
            queries,
            edges,
            out,
        } => cmd_bucket_report(&run, &queries, &edges, out.as_deref()),
        Command::DumpConfig => {
            write!(std::io::stdout().lock(), "{}", config.to_toml_string()?)?;
            Ok(())
        }
    }
}

fn cmd_index(config: &AppConfig, out: &Path) -> Result<(), CliError> {
    let analyzer = load_analyzer(config)?;
    let corpus = load_target_corpus(config)?;
    let index = LexicalIndex::build(&corpus, analyzer.as_ref(), config.bm25)?;
    index.save(out)?;
    writeln!(
        std::io::stdout().lock(),
        "{}",
        json!({
            "documents": index.doc_count(),
            "terms": index.term_count(),
            "avg_doc_length": index.avg_doc_length(),
            "analyzer": index.analyzer_fingerprint(),
            "snapshot": out.display().to_string(),
        })
    )?;
    Ok(())
}

fn cmd_search(
    config: &AppConfig,
    query: &str,
    top: usize,
    index: Option<&Path>,
    as_json: bool,
) -> Result<(), CliError> {
    if top == 0 {
        return Err(CliError::Config("--top must be at least 1".into()));
    }
    let engine = build_engine(config, index)?;
    let response = service::search(&engine, query, top)?;
    let mut out = std::io::stdout().lock();
    if as_json {
        serde_json::to_writer(&mut out, &response).map_err(std::io::Error::from)?;
        writeln!(out)?;
        return Ok(());
    }
    if response.degraded {
        writeln!(out, "# relevance scorer unavailable; lexical-only results")?;
    }
    writeln!(
        out,
        "{:>4}  {:<16} {:<12} {:>10} {:>10} {:>10}  question",
        "rank", "faq_id", "group", "similarity", "relevance", "fused"
    )?;
    for (i, r) in response.results.iter().enumerate() {
        let group = serde_json::to_value(r.group).map_err(std::io::Error::from)?;
        writeln!(
            out,
            "{:>4}  {:<16} {:<12} {:>10.4} {:>10.4} {:>10.4}  {}",
            i + 1,
            r.faq_id,
            group.as_str().unwrap_or_default(),
            r.similarity,
            r.relevance,
            r.fused_score,
            r.question
        )?;
    }
    Ok(())
}

fn select_fold(queries: Vec<QueryRecord>, splits: &Path, fold: usize) -> Result<Vec<QueryRecord>, CliError> {
    let text = std::fs::read_to_string(splits).map_err(|e| CliError::Io(format!("{}: {e}", splits.display())))?;
    let folds: Vec<FoldSplit> =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", splits.display())))?;
    let split = folds
        .into_iter()
        .find(|f| f.fold == fold)
        .ok_or_else(|| CliError::Config(format!("fold {fold} not found in {}", splits.display())))?;
    let wanted: std::collections::HashSet<String> = split.test.into_iter().collect();
    Ok(queries.into_iter().filter(|q| wanted.contains(&q.qid)).collect())
}

fn cmd_evaluate(
    config: &AppConfig,
    queries_path: &Path,
    methods: &[MethodArg],
    out_dir: &Path,
    depth: usize,
    selection: Option<(PathBuf, usize)>,
    gain: GainArg,
) -> Result<(), CliError> {
    if depth == 0 {
        return Err(CliError::Config("--depth must be at least 1".into()));
    }
    let engine = build_engine(config, None)?;
    let mut queries = load_query_set(queries_path)?;
    validate_judgments(&queries, engine.corpus())?;
    if let Some((splits, fold)) = selection {
        queries = select_fold(queries, &splits, fold)?;
    }
    let eval = EvalConfig {
        gain_mode: match gain {
            GainArg::Linear => GainMode::Linear,
            GainArg::Exponential => GainMode::Exponential,
        },
        ..EvalConfig::default()
    };
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    let mut seen = Vec::new();
    for &m in methods {
        if seen.contains(&m) {
            continue;
        }
        seen.push(m);
        let method = Method::from(m);
        let mut run = Vec::new();
        for q in &queries {
            let result = engine.run_query(method, &q.qid, &q.text, depth)?;
            if result.degraded {
                return Err(CliError::Scorer(format!(
                    "relevance scorer unavailable while evaluating query {}",
                    q.qid
                )));
            }
            run.extend(result.entries);
        }
        let tag = method.tag();
        write_run_file(&run, out_dir.join(format!("{tag}.run")))?;
        let report = evaluate_run(&run, &queries, &eval)?;
        let json_out = create(&out_dir.join(format!("{tag}.report.json")))?;
        serde_json::to_writer_pretty(json_out, &report).map_err(std::io::Error::from)?;
        let table = report.to_table();
        std::fs::write(out_dir.join(format!("{tag}.report.txt")), &table)?;
        writeln!(std::io::stdout().lock(), "== {tag}\n{table}")?;
    }
    Ok(())
}

fn cmd_gen_training(
    config: &AppConfig,
    out: &Path,
    neg_ratio: usize,
    seed: u64,
    scope: ScopeArg,
) -> Result<(), CliError> {
    // training draws on every FAQ set in the file, not just the search target
    let corpus = load_faq_corpus(corpus_path(config)?)?;
    let corpora = corpus.split_by_source();
    let scope = match scope {
        ScopeArg::Pooled => NegativeScope::Pooled,
        ScopeArg::SameSource => NegativeScope::SameSource,
    };
    let examples = generate_training_pairs(&corpora, neg_ratio, seed, scope)?;
    write_training_examples(&examples, create(out)?)?;
    let positives = examples.iter().filter(|e| e.label == 1).count();
    writeln!(
        std::io::stdout().lock(),
        "{}",
        json!({"examples": examples.len(), "positives": positives, "negatives": examples.len() - positives})
    )?;
    Ok(())
}

fn cmd_split(queries: &Path, folds: usize, dev_ratio: f64, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let records = load_query_set(queries)?;
    let ids: Vec<String> = records.into_iter().map(|q| q.qid).collect();
    let test = if folds > 0 { 1.0 / folds as f64 } else { 0.0 };
    let ratios = SplitRatios {
        train: 1.0 - test - dev_ratio,
        dev: dev_ratio,
        test,
    };
    let splits = kfold_split(&ids, folds, ratios, seed)?;
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &splits).map_err(std::io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn cmd_bucket_report(run: &Path, queries: &Path, edges: &[f64], out: Option<&Path>) -> Result<(), CliError> {
    let run = read_run_file(run)?;
    let queries = load_query_set(queries)?;
    let rows = score_bucket_report(&run, &queries, &EvalConfig::default(), edges)?;
    write_bucket_csv(&rows, output(out)?)?;
    Ok(())
}

fn cmd_serve(config: AppConfig, index: Option<PathBuf>) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", config.service.bind, config.service.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Io(format!("bind {addr}: {e}")))?;
        tracing::info!(%addr, "listening");
        let state = AppState::new();
        let loader = state.clone();
        let build = tokio::task::spawn_blocking(move || -> Result<(), CliError> {
            let engine = build_engine(&config, index.as_deref())?;
            tracing::info!(documents = engine.index().doc_count(), "index ready");
            loader.set_engine(engine);
            Ok(())
        });
        let server = tokio::spawn(service::serve(listener, state));
        // a failed load is fatal; the server keeps answering 503 until then
        build.await.map_err(|e| CliError::Io(e.to_string()))??;
        server
            .await
            .map_err(|e| CliError::Io(e.to_string()))?
            .map_err(CliError::from)
    })
}
