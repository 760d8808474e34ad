//! Operator CLI and HTTP service for the talechat engine.

pub mod generator;
pub mod server;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use talechat_core::classify::{build_training_set, evaluate, stratified_split, BayesModel, EmotionClassifier, IntentClassifier};
use talechat_core::clock::SystemClock;
use talechat_core::config::Config;
use talechat_core::corpus::{Corpus, CorpusError};
use talechat_core::dialogue::{Engine, Knowledge};
use talechat_core::monitor::{valence_split, Monitor, RiskLexicon, Segment};
use talechat_core::textproc::StopwordList;

#[derive(Debug, Parser)]
#[command(name = "talechat", version, about = "Tale recommendation chatbot: operator tools and HTTP service")]
pub struct Cli {
    /// Configuration file.
    #[arg(long, global = true, env = "TALECHAT_CONFIG", default_value = "talechat.toml")]
    pub config: PathBuf,

    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every corpus invariant and list the violations.
    ValidateCorpus {
        /// Corpus directory; defaults to the configured one.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Build the tale and quote indexes and report their size.
    Index,
    /// Train a classifier from its lexicons and write a model snapshot.
    Train {
        #[arg(value_enum)]
        target: Target,
        /// Snapshot path; defaults to `<data_dir>/models/<target>.nb`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Held-out accuracy of a classifier on a stratified lexicon split.
    Eval {
        #[arg(long, value_enum, default_value_t = Target::Emotions)]
        target: Target,
        /// Share of each class held out for testing.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Per-emotion selection percentages, optionally for one segment
    /// (`female`, `18-23`, `female:18-23`, ...).
    Stats {
        #[arg(long)]
        segment: Option<String>,
    },
    /// Write the corpus files, normalized, into a directory.
    ExportCorpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        /// Listen address; overrides the configured one.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Emotions,
    Intents,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Emotions => "emotions",
            Target::Intents => "intents",
        }
    }

    fn classes(self) -> Vec<String> {
        match self {
            Target::Emotions => EmotionClassifier::class_registry(),
            Target::Intents => IntentClassifier::class_registry(),
        }
    }

    fn lexicon_dir(self, cfg: &Config) -> &Path {
        match self {
            Target::Emotions => &cfg.lexicons.emotions,
            Target::Intents => &cfg.lexicons.intents,
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<Config> {
    let cfg = Config::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(value: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::ValidateCorpus { corpus } => {
            let dir = match corpus {
                Some(d) => d,
                None => load_config(&cli.config)?.corpus_dir,
            };
            validate_corpus(&dir, cli.json)
        }
        Command::Index => index(&load_config(&cli.config)?, cli.json),
        Command::Train { target, out } => train(&load_config(&cli.config)?, target, out, cli.json),
        Command::Eval { target, holdout, seed } => eval(&load_config(&cli.config)?, target, holdout, seed, cli.json),
        Command::Stats { segment } => stats(&load_config(&cli.config)?, segment.as_deref(), cli.json),
        Command::ExportCorpus { out } => export_corpus(&load_config(&cli.config)?, &out, cli.json),
        Command::Serve { listen } => serve(&load_config(&cli.config)?, listen, cli.json),
    }
}

fn validate_corpus(dir: &Path, as_json: bool) -> anyhow::Result<ExitCode> {
    let violations: Vec<String> = match Corpus::load(dir) {
        Ok(_) => Vec::new(),
        Err(CorpusError::Invalid(v)) => v.iter().map(ToString::to_string).collect(),
        Err(other) => vec![other.to_string()],
    };
    if as_json {
        print_json(&json!({
            "corpus": dir.display().to_string(),
            "valid": violations.is_empty(),
            "violations": violations,
        }))?;
    } else if violations.is_empty() {
        println!("corpus {} is valid", dir.display());
    } else {
        println!("corpus {}: {} violation(s)", dir.display(), violations.len());
        for v in &violations {
            println!("  - {v}");
        }
    }
    Ok(if violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn stopwords(cfg: &Config) -> anyhow::Result<StopwordList> {
    Ok(match &cfg.stopwords {
        Some(p) => StopwordList::load(p)?,
        None => StopwordList::empty(),
    })
}

fn index(cfg: &Config, as_json: bool) -> anyhow::Result<ExitCode> {
    let corpus = Corpus::load(&cfg.corpus_dir)?;
    let counts = corpus.status_counts();
    let k = Knowledge::build(corpus, &stopwords(cfg)?);
    let report = json!({
        "tales": {
            "indexed": k.tales.len(),
            "vocabulary": k.tales.vocabulary_size(),
            "avgdl": k.tales.avgdl(),
        },
        "quotes": {
            "indexed": k.quotes.len(),
            "vocabulary": k.quotes.vocabulary_size(),
            "avgdl": k.quotes.avgdl(),
        },
        "status": counts,
    });
    if as_json {
        print_json(&report)?;
    } else {
        println!(
            "tales: {} indexed ({} pending, {} rejected), vocabulary {}, avgdl {:.2}",
            k.tales.len(),
            counts.pending,
            counts.rejected,
            k.tales.vocabulary_size(),
            k.tales.avgdl()
        );
        println!(
            "quotes: {} indexed, vocabulary {}, avgdl {:.2}",
            k.quotes.len(),
            k.quotes.vocabulary_size(),
            k.quotes.avgdl()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn train(cfg: &Config, target: Target, out: Option<PathBuf>, as_json: bool) -> anyhow::Result<ExitCode> {
    let classes = target.classes();
    let docs = build_training_set(&classes, target.lexicon_dir(cfg))?;
    let model = BayesModel::train(&classes, &docs, cfg.classifier.alpha)?;
    let out = out.unwrap_or_else(|| cfg.data_dir.join("models").join(format!("{}.nb", target.name())));
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&out, model.to_snapshot()).with_context(|| format!("writing {}", out.display()))?;
    if as_json {
        print_json(&json!({
            "target": target.name(),
            "classes": model.classes().len(),
            "documents": docs.len(),
            "vocabulary": model.vocabulary_size(),
            "snapshot": out.display().to_string(),
        }))?;
    } else {
        println!(
            "trained {} model: {} classes, {} documents, vocabulary {} -> {}",
            target.name(),
            model.classes().len(),
            docs.len(),
            model.vocabulary_size(),
            out.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(cfg: &Config, target: Target, holdout: f64, seed: u64, as_json: bool) -> anyhow::Result<ExitCode> {
    if !(holdout > 0.0 && holdout < 1.0) {
        bail!("--holdout must lie in (0, 1), got {holdout}");
    }
    let classes = target.classes();
    let docs = build_training_set(&classes, target.lexicon_dir(cfg))?;
    let (train, test) = stratified_split(&docs, holdout, seed);
    let model = BayesModel::train(&classes, &train, cfg.classifier.alpha)?;
    let e = evaluate(&model, &test)?;
    if as_json {
        print_json(&json!({
            "target": target.name(),
            "holdout": holdout,
            "seed": seed,
            "train": train.len(),
            "evaluation": e,
        }))?;
    } else {
        println!(
            "{} accuracy: {:.4} ({}/{} held-out documents, {} training, seed {seed})",
            target.name(),
            e.accuracy,
            e.correct,
            e.total,
            train.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn open_monitor(cfg: &Config) -> anyhow::Result<Monitor> {
    let risk = RiskLexicon::load(&cfg.lexicons.risk)?;
    Ok(Monitor::open(&cfg.data_dir, risk, Arc::new(SystemClock))?)
}

fn stats(cfg: &Config, segment: Option<&str>, as_json: bool) -> anyhow::Result<ExitCode> {
    let segment: Segment = segment.unwrap_or("").parse()?;
    let monitor = open_monitor(cfg)?;
    let stats = monitor.emotion_stats(segment);
    let split = valence_split(&stats);
    if as_json {
        print_json(&json!({
            "segment": segment.to_string(),
            "total": stats.total,
            "empty": stats.empty,
            "valence": split,
            "emotions": stats
                .counts
                .iter()
                .zip(&stats.percentages)
                .map(|((e, c), (_, p))| json!({ "emotion": e, "count": c, "percentage": p }))
                .collect::<Vec<_>>(),
        }))?;
        return Ok(ExitCode::SUCCESS);
    }
    println!("segment: {segment} ({} selections)", stats.total);
    if stats.empty {
        println!("no selections in this segment");
        return Ok(ExitCode::SUCCESS);
    }
    println!("{:<22} {:>6} {:>8}", "emotion", "count", "percent");
    for ((e, c), (_, p)) in stats.counts.iter().zip(&stats.percentages) {
        println!("{:<22} {:>6} {:>7.2}%", e.id(), c, p);
    }
    println!("positive {:.2}% / negative {:.2}%", split.positive, split.negative);
    Ok(ExitCode::SUCCESS)
}

fn export_corpus(cfg: &Config, out: &Path, as_json: bool) -> anyhow::Result<ExitCode> {
    let corpus = Corpus::load(&cfg.corpus_dir)?;
    corpus.export(out)?;
    if as_json {
        print_json(&json!({ "exported": out.display().to_string(), "tales": corpus.tales.len() }))?;
    } else {
        println!("exported {} tales to {}", corpus.tales.len(), out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(cfg: &Config, listen: Option<String>, as_json: bool) -> anyhow::Result<ExitCode> {
    let generator = generator::from_settings(&cfg.generation);
    let engine = Engine::from_config(cfg, Arc::new(SystemClock), generator).context("startup failed")?;
    let state = server::AppState::new(Arc::new(engine), cfg.supervisor_token.clone());
    let addr = listen.unwrap_or_else(|| cfg.listen.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let (listener, local) = server::bind(&addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        if as_json {
            println!("{}", json!({ "listening": local.to_string() }));
        } else {
            println!("listening on http://{local}");
        }
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        server::serve(listener, state, shutdown).await?;
        anyhow::Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}
