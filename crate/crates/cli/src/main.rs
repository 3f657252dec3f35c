mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "kgreason", version, about = "Logical query corpus pipeline over knowledge graphs")]
struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset directory with train.txt, valid.txt, test.txt and label files.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Working directory for query files, corpus files and reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Token budget per sample.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Stage mixes, e.g. `s1=80,10,10;s2=10,80,10;s3=10,10,80`.
    #[arg(long, global = true)]
    mix: Option<String>,
    /// Comma-separated query types, e.g. `1p,2in`.
    #[arg(long, global = true)]
    types: Option<String>,
    /// Queries per type and split.
    #[arg(long, global = true)]
    per_type: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample queries for every split into queries_<split>.tsv.
    Sample,
    /// Build the corpus, the three stage files and stats.json.
    Build {
        /// Samples per stage (default: as many as the pools allow).
        #[arg(long)]
        stage_size: Option<usize>,
        /// Let a sample appear in more than one stage.
        #[arg(long)]
        allow_repeats: bool,
    },
    /// Write oracle predictions for a corpus file.
    Oracle {
        #[arg(long)]
        corpus: PathBuf,
        /// Graph the oracle answers on.
        #[arg(long, value_enum, default_value_t = OracleGraph::Complete)]
        graph: OracleGraph,
        /// Predictions file (default: <out>/predictions.jsonl).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Score predictions against a corpus file.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// stats.json whose discarded samples count as 0 (default:
        /// <out>/stats.json when it exists).
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Accuracy as exact set match instead of hard-answer recall.
        #[arg(long)]
        exact_set: bool,
    },
    /// Print the subquery chain for one s-expression.
    Decompose { query: String },
    /// Print easy and hard answers for an s-expression or a query file.
    Answer {
        query: Option<String>,
        #[arg(long, conflicts_with = "query")]
        queries: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = EvalSplit::Test)]
        split: EvalSplit,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OracleGraph {
    Train,
    TrainValid,
    Complete,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EvalSplit {
    Valid,
    Test,
}

fn resolve_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut c = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = &cli.dataset {
        c.dataset = Some(v.clone());
    }
    if let Some(v) = &cli.out {
        c.out = Some(v.clone());
    }
    if let Some(v) = cli.seed {
        c.seed = v;
    }
    if let Some(v) = cli.budget {
        c.budget = v;
    }
    if let Some(v) = &cli.mix {
        c.mix = v.clone();
    }
    if let Some(v) = &cli.types {
        c.types = v.clone();
    }
    if let Some(v) = cli.per_type {
        c.per_type = v;
    }
    if let Command::Build {
        stage_size,
        allow_repeats,
    } = &cli.command
    {
        if stage_size.is_some() {
            c.stage_size = *stage_size;
        }
        if *allow_repeats {
            c.disjoint_stages = false;
        }
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = resolve_config(&cli)?;
    match cli.command {
        Command::Sample => commands::sample(&config),
        Command::Build { .. } => commands::build(&config),
        Command::Oracle {
            corpus,
            graph,
            predictions,
        } => commands::oracle(&config, &corpus, graph, predictions),
        Command::Eval {
            corpus,
            predictions,
            stats,
            exact_set,
        } => commands::eval(&config, &corpus, &predictions, stats, exact_set),
        Command::Decompose { query } => commands::decompose(&query),
        Command::Answer {
            query,
            queries,
            split,
        } => commands::answer(&config, query.as_deref(), queries.as_deref(), split),
    }
}

/// 2 for filesystem failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>().is_some()
            || e.downcast_ref::<kgreason_core::Error>().is_some_and(kgreason_core::Error::is_io)
    });
    if io {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
