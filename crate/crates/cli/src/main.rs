use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use kbqe::corpus::{self, CorpusReader, EnglishFilter, PreprocessConfig, Preprocessor, Rejection};
use kbqe::evaluation::{evaluate_run, paired_t_test, EvalReport, Qrels, RelevanceMode, Run, DEFAULT_N_VALUES};
use kbqe::pipeline::{self, parse_overrides, render_run, Engine, SweepParam, SystemConfig};
use kbqe::{ConceptStore, Index};

#[derive(Parser)]
#[command(name = "kbqe", version, about = "Knowledge-based query expansion for microblog search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index snapshot from a JSON-lines corpus.
    Index(IndexArgs),
    /// Rank documents for every topic and write a TREC run.
    Run(RunArgs),
    /// Score a run against qrels.
    Eval(EvalArgs),
    /// Evaluate a grid of values for one parameter.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// One stopword per line; replaces the bundled list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, value_parser = ["off", "heuristic"], default_value = "off")]
    english_filter: String,
    /// Do not append linked page titles to the tweet text.
    #[arg(long)]
    no_url_titles: bool,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Knowledge terms to keep, or MAX.
    #[arg(long = "k", short = 'k')]
    k: Option<String>,
    /// Pseudo-relevance documents for term selection.
    #[arg(long = "n", short = 'n')]
    n: Option<String>,
    /// Temporal prior rate.
    #[arg(long = "r", short = 'r')]
    r: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    fb_docs: Option<String>,
    #[arg(long)]
    fb_terms: Option<String>,
    #[arg(long)]
    depth: Option<String>,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long)]
    index: PathBuf,
    /// JSON-lines concept store; required by the qefb variants.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    topics: PathBuf,
    /// `topic_id concept_id...` lines replacing automatic concept matching.
    #[arg(long)]
    overrides: Option<PathBuf>,
    /// Tagger lexicon (`word<TAB>TAG`); replaces the bundled one.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-topic stage dump.
    #[arg(long)]
    debug_dump: Option<PathBuf>,
    /// Run tag in the last column; defaults to the variant name.
    #[arg(long)]
    tag: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value = "allrel")]
    mode: String,
    /// Comma-separated cutoffs for P@N.
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    /// Second run for a paired t-test on per-topic AP.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    qrels: PathBuf,
    /// alpha, beta, K, N or r.
    #[arg(long)]
    param: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[arg(long, default_value = "allrel")]
    mode: String,
    #[arg(long)]
    json: bool,
}

/// Failure that maps to exit code 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: kbqe::Error) -> anyhow::Error {
    anyhow::Error::new(Usage(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Usage>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    let stopwords = match &a.stopwords {
        Some(p) => corpus::load_stopwords(p)?,
        None => corpus::default_stopwords(),
    };
    let english_filter = match a.english_filter.as_str() {
        "heuristic" => EnglishFilter::Heuristic,
        _ => EnglishFilter::Off,
    };
    let pre = Preprocessor::new(PreprocessConfig {
        stopwords,
        english_filter,
        merge_url_titles: !a.no_url_titles,
        ..PreprocessConfig::default()
    });
    let (docs, stats) = corpus::ingest(CorpusReader::open(&a.corpus)?, &pre)?;
    let index = Index::build(docs)?;
    let mut sorted: Vec<String> = pre.config().stopwords.iter().cloned().collect();
    sorted.sort();
    index.save(&a.out, &sorted)?;

    let mut line = format!("documents {}", index.num_docs());
    for r in [Rejection::Retweet, Rejection::NonEnglish, Rejection::EmptyAfterPreprocess] {
        let _ = write!(line, " rejected_{r} {}", stats.rejected.get(&r).copied().unwrap_or(0));
    }
    let _ = write!(line, " malformed {} vocabulary {}", stats.malformed, index.vocabulary_size());
    println!("{line}");
    Ok(())
}

fn system_config(a: &ConfigArgs) -> Result<SystemConfig> {
    let mut pairs = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SystemConfig::parse_pairs(&text, &p.display().to_string()).map_err(usage)?
        }
        None => Vec::new(),
    };
    let flags = [
        ("variant", &a.variant),
        ("mu", &a.mu),
        ("alpha", &a.alpha),
        ("beta", &a.beta),
        ("k", &a.k),
        ("n", &a.n),
        ("r", &a.r),
        ("lambda", &a.lambda),
        ("fb_docs", &a.fb_docs),
        ("fb_terms", &a.fb_terms),
        ("depth", &a.depth),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            pairs.push((k.to_string(), v.clone()));
        }
    }
    SystemConfig::from_pairs(&pairs).map_err(usage)
}

fn load_engine(a: &EngineArgs) -> Result<(Engine, Vec<kbqe::Topic>)> {
    let mut engine = Engine::from_snapshot(&a.index)?;
    if let Some(p) = &a.store {
        let (store, stats) = ConceptStore::load(p)?;
        log::info!("concept store: {} loaded, {} malformed, {} collisions", stats.loaded, stats.malformed, stats.collisions);
        engine = engine.with_store(store);
    }
    if let Some(p) = &a.overrides {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        engine = engine.with_overrides(parse_overrides(&text));
    }
    if let Some(p) = &a.lexicon {
        engine.tagger = kbqe::knowledge::LexiconTagger::load(p)?;
    }
    let topics = pipeline::load_topics(&a.topics)?;
    Ok((engine, topics))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = system_config(&a.config)?;
    let (engine, topics) = load_engine(&a.engine)?;
    let results = engine.run_topics(&topics, &cfg)?;
    let tag = a.tag.as_deref().unwrap_or(cfg.variant.name());
    let run = render_run(results.iter().map(|(l, _)| l), tag);
    write_out(a.out.as_deref(), &run)?;
    if let Some(p) = &a.debug_dump {
        let dump: String = results.iter().map(|(_, t)| t.dump()).collect();
        fs::write(p, dump).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn report_text(report: &EvalReport, json: bool) -> String {
    if json {
        report.to_json() + "\n"
    } else {
        report.to_table()
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let mode: RelevanceMode = a.mode.parse().map_err(usage)?;
    let n_values = a.n_values.clone().unwrap_or_else(|| DEFAULT_N_VALUES.to_vec());
    let qrels = Qrels::load(&a.qrels)?;
    let report = evaluate_run(&Run::load(&a.run)?, &qrels, mode, &n_values);
    let mut out = report_text(&report, a.json);
    if let Some(b) = &a.baseline {
        let base = evaluate_run(&Run::load(b)?, &qrels, mode, &n_values);
        let topics: Vec<&String> = report.per_topic.keys().filter(|t| base.per_topic.contains_key(*t)).collect();
        let xs: Vec<f64> = topics.iter().map(|t| report.per_topic[*t].ap).collect();
        let ys: Vec<f64> = topics.iter().map(|t| base.per_topic[*t].ap).collect();
        let (t, p) = paired_t_test(&xs, &ys)?;
        if a.json {
            let v = serde_json::json!({ "t": t, "p": p, "topics": topics.len() });
            out += &format!("{v}\n");
        } else {
            let _ = writeln!(out, "# paired t-test vs baseline: t={t:.4} p={p:.4} topics={}", topics.len());
        }
    }
    print!("{out}");
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let param: SweepParam = a.param.parse().map_err(usage)?;
    let mode: RelevanceMode = a.mode.parse().map_err(usage)?;
    let cfg = system_config(&a.config)?;
    for v in &a.values {
        let mut probe = cfg.clone();
        probe.set(&a.param, v).and_then(|_| probe.validate()).map_err(usage)?;
    }
    let (engine, topics) = load_engine(&a.engine)?;
    let qrels = Qrels::load(&a.qrels)?;
    let rows = pipeline::sweep(&engine, &topics, &qrels, &cfg, param, &a.values, mode)?;
    if a.json {
        for r in &rows {
            let mut m = serde_json::Map::new();
            m.insert("value".into(), r.value.clone().into());
            m.insert("map".into(), r.map.into());
            for (n, p) in &r.p_at {
                m.insert(format!("p@{n}"), (*p).into());
            }
            println!("{}", serde_json::Value::Object(m));
        }
    } else {
        print!("{}", pipeline::sweep_table(param, &rows));
    }
    Ok(())
}
