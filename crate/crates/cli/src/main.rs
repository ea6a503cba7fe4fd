use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use cfa_cli::commands::{self, ScorerKind};
use cfa_cli::config::{parse_strategies, RunConfig, SystemEntry, Weights};
use cfa_cli::http::HttpGenerator;
use cfa_cli::{exit_code, EXIT_VALIDATION};
use cfa_core::{CfaError, LabelSet, Result, TieMode, TiePolicy};
use clap::{Args, Parser, Subcommand};

/// Combine multiple label-scoring systems and evaluate the fused rankings.
#[derive(Parser)]
#[command(name = "cfa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated label list, in order.
    #[arg(long, global = true)]
    labels: Option<String>,
}

#[derive(Args, Default)]
struct FusionArgs {
    /// Scoring system as ID=PATH (repeatable).
    #[arg(long = "system", value_name = "ID=PATH")]
    systems: Vec<SystemEntry>,
    /// fractional|ordinal
    #[arg(long)]
    tie_policy: Option<TiePolicy>,
    /// strict|lenient
    #[arg(long)]
    tie_mode: Option<TieMode>,
    /// Comma-separated subset of asc,arc,wsc,wrc.
    #[arg(long)]
    strategies: Option<String>,
    /// Smallest subset size in the grid.
    #[arg(long)]
    min_subset: Option<usize>,
    /// ds|perf
    #[arg(long)]
    weights: Option<Weights>,
    /// Expert labels CSV (doc_id,label).
    #[arg(long)]
    experts: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Score a corpus with a built-in scorer.
    Score {
        #[arg(long)]
        scorer: ScorerKind,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Labelled training corpus for the tf-idf scorer.
        #[arg(long)]
        train: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Cognitive diversity and diversity strength per document.
    Diversity {
        /// Also write the rank-score curve table for this document (repeatable).
        #[arg(long = "doc")]
        docs: Vec<String>,
        #[command(flatten)]
        fusion: FusionArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run the full combination grid.
    Fuse {
        #[command(flatten)]
        fusion: FusionArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate individual systems and fused models against expert labels.
    Evaluate {
        /// Fused rankings; defaults to <out>/fused.csv.
        #[arg(long)]
        fused: Option<PathBuf>,
        #[command(flatten)]
        fusion: FusionArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Per-label lexical quality statistics of a corpus.
    CorpusStats {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Expand prompt specs into the full prompt matrix.
    GenPrompts {
        #[arg(long)]
        specs: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fetch generated text for every prompt; resumes where it left off.
    Generate {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        endpoint: Option<String>,
        /// Bearer token; falls back to CFA_API_TOKEN.
        #[arg(long)]
        token: Option<String>,
        #[arg(long)]
        concurrency: Option<usize>,
        /// Per-request timeout in seconds.
        #[arg(long, default_value_t = 120)]
        timeout: u64,
        #[command(flatten)]
        common: Common,
    },
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(labels) = &common.labels {
        cfg.labels = Some(labels.split(',').map(|l| l.trim().to_string()).collect());
    }
    Ok(cfg)
}

fn fusion_config(common: &Common, f: FusionArgs) -> Result<RunConfig> {
    let mut cfg = base_config(common)?;
    if !f.systems.is_empty() {
        cfg.systems = f.systems;
    }
    if let Some(v) = f.tie_policy {
        cfg.tie_policy = v;
    }
    if let Some(v) = f.tie_mode {
        cfg.tie_mode = v;
    }
    if let Some(v) = &f.strategies {
        cfg.strategies = parse_strategies(v)?;
    }
    if let Some(v) = f.min_subset {
        cfg.min_subset = v;
    }
    if let Some(v) = f.weights {
        cfg.weights = v;
    }
    if let Some(v) = f.experts {
        cfg.experts = Some(v);
    }
    Ok(cfg)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score {
            scorer,
            corpus,
            lexicon,
            train,
            common,
        } => {
            let cfg = base_config(&common)?;
            let lexicon = lexicon.or(cfg.lexicon.clone());
            let train = train.or(cfg.train.clone());
            let path = commands::score(
                scorer,
                cfg.label_set()?,
                &corpus,
                lexicon.as_deref(),
                train.as_deref(),
                &cfg.out,
            )?;
            report(&[path]);
        }
        Command::Diversity {
            docs,
            fusion,
            common,
        } => {
            let cfg = fusion_config(&common, fusion)?;
            report(&commands::diversity(&cfg, &docs)?);
        }
        Command::Fuse { fusion, common } => {
            let cfg = fusion_config(&common, fusion)?;
            report(&[commands::fuse(&cfg)?]);
        }
        Command::Evaluate {
            fused,
            fusion,
            common,
        } => {
            let cfg = fusion_config(&common, fusion)?;
            let fused = fused.unwrap_or_else(|| cfg.out.join(commands::FUSED_FILE));
            let (rep, paths) = commands::evaluate(&cfg, &fused)?;
            println!(
                "documents: {}  tie mode: {}  best individual: {} ({})",
                rep.documents,
                rep.tie_mode,
                rep.best_individual.representative,
                rep.best_individual.precision.percent()
            );
            if let Some(best) = &rep.best_combined {
                println!(
                    "best combined: {} ({})",
                    best.representative,
                    best.precision.percent()
                );
            }
            println!(
                "per-label >= best individual: {}  per-label >= mean individual: {}  overall >= best individual: {}",
                rep.grid.per_label_vs_best.percent(),
                rep.grid.per_label_vs_mean.percent(),
                rep.grid.overall_vs_best.percent()
            );
            report(&paths);
        }
        Command::CorpusStats { corpus, common } => {
            let cfg = base_config(&common)?;
            report(&[commands::corpus_stats(&corpus, &cfg.out)?]);
        }
        Command::GenPrompts { specs, common } => {
            let cfg = base_config(&common)?;
            let labels = cfg.label_set()?.unwrap_or_else(LabelSet::sdg);
            let (path, n) = commands::gen_prompts(&specs, &labels, &cfg.out)?;
            println!("{n} prompts");
            report(&[path]);
        }
        Command::Generate {
            prompts,
            endpoint,
            token,
            concurrency,
            timeout,
            common,
        } => {
            let cfg = base_config(&common)?;
            let endpoint = endpoint
                .or(cfg.endpoint.clone())
                .ok_or_else(|| CfaError::validation("no generation endpoint configured"))?;
            let token = token
                .or(cfg.token.clone())
                .or_else(|| std::env::var("CFA_API_TOKEN").ok());
            let generator = HttpGenerator::new(endpoint, token, Duration::from_secs(timeout));
            let outcome = commands::generate(
                &prompts,
                &generator,
                &cfg.out,
                concurrency.unwrap_or(cfg.concurrency),
            )?;
            println!(
                "generated: {}  skipped: {}  failed: {}",
                outcome.documents.len(),
                outcome.skipped,
                outcome.errors.len()
            );
            report(&[
                cfg.out.join(commands::CORPUS_FILE),
                cfg.out.join("generation_errors.csv"),
            ]);
            if !outcome.errors.is_empty() {
                return Err(CfaError::io(
                    Path::new(&cfg.out).join("generation_errors.csv"),
                    std::io::Error::other(format!("{} prompt(s) failed", outcome.errors.len())),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
