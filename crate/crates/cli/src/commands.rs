use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use kgreason_core::corpus::{read_jsonl, write_jsonl, DiscardedSample};
use kgreason_core::eval::{evaluate, AccuracyMode, EvalOptions, PredictionLine};
use kgreason_core::pipeline::{oracle_predictions, sample_split, SamplingPlan};
use kgreason_core::query::{read_queries, write_queries};
use kgreason_core::{
    build_corpus, compile, difficulty, parse, schedule_stages, split_answers, CorpusRecord, CorpusStats, EntitySet,
    GroundedQuery, LabelIndex, Mix, Split, SplitGraphs,
};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::{EvalSplit, OracleGraph};

fn io_err(path: &Path, e: std::io::Error) -> kgreason_core::Error {
    kgreason_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn load_splits(config: &PipelineConfig) -> anyhow::Result<SplitGraphs> {
    let dir = config.dataset()?;
    if !dir.is_dir() {
        return Err(io_err(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found")).into());
    }
    let splits = SplitGraphs::load(dir)?;
    eprintln!(
        "loaded {}: {} train, {} train+valid, {} total triples",
        dir.display(),
        splits.train.len(),
        splits.train_valid.len(),
        splits.complete().len()
    );
    Ok(splits)
}

fn out_dir(config: &PipelineConfig) -> anyhow::Result<&Path> {
    let out = config.out()?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    Ok(out)
}

pub fn queries_file(out: &Path, split: Split) -> PathBuf {
    out.join(format!("queries_{split}.tsv"))
}

pub fn sample(config: &PipelineConfig) -> anyhow::Result<()> {
    let splits = load_splits(config)?;
    let out = out_dir(config)?;
    let mut plan = SamplingPlan::new(config.per_type, config.seed);
    plan.types = config.query_types()?;
    for split in Split::ALL {
        let queries = sample_split(&splits, split, &plan).with_context(|| format!("sampling {split} queries"))?;
        let path = queries_file(out, split);
        write_queries(&path, &queries)?;
        eprintln!("wrote {} queries to {}", queries.len(), path.display());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct StageSummary {
    file: String,
    mix: Mix,
    size: usize,
    /// easy, medium, hard
    counts: [usize; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct BuildStats {
    #[serde(flatten)]
    corpus: CorpusStats,
    stages: Vec<StageSummary>,
}

/// Only the part of stats.json the evaluator needs.
#[derive(Debug, Deserialize)]
struct DiscardList {
    #[serde(default)]
    discarded: Vec<DiscardedSample>,
}

pub fn build(config: &PipelineConfig) -> anyhow::Result<()> {
    let splits = load_splits(config)?;
    let out = out_dir(config)?;
    let mut tagged: Vec<(Split, GroundedQuery)> = Vec::new();
    for split in Split::ALL {
        let queries = read_queries(queries_file(out, split))?;
        tagged.extend(queries.into_iter().map(|q| (split, q)));
    }
    let corpus = build_corpus(&splits, &tagged, &config.corpus_config()?)?;
    eprintln!(
        "built {} samples, discarded {} over the {}-token budget",
        corpus.stats.total.emitted, corpus.stats.total.discarded, config.budget
    );

    let records = |split: Split| -> Vec<CorpusRecord> { corpus.split(split).map(|s| s.to_record()).collect() };
    let train = records(Split::Train);
    write_jsonl(out.join("corpus_train.jsonl"), &train)?;
    write_jsonl(out.join("eval_valid.jsonl"), records(Split::Valid))?;
    write_jsonl(out.join("eval_test.jsonl"), records(Split::Test))?;

    let schedule = config.schedule()?;
    let stages = schedule_stages(&train, &schedule)?;
    let mut summaries = Vec::new();
    for (k, (stage, spec)) in stages.iter().zip(&schedule.stages).enumerate() {
        let file = format!("stage{}.jsonl", k + 1);
        write_jsonl(out.join(&file), stage.iter().copied())?;
        let mut counts = [0; 3];
        for r in stage {
            counts[usize::from(r.difficulty.clamp(1, 3)) - 1] += 1;
        }
        eprintln!("{file}: {} samples, easy/medium/hard = {counts:?}", stage.len());
        summaries.push(StageSummary {
            file,
            mix: spec.mix,
            size: stage.len(),
            counts,
        });
    }
    let stats = BuildStats {
        corpus: corpus.stats,
        stages: summaries,
    };
    let path = out.join("stats.json");
    fs::write(&path, serde_json::to_string_pretty(&stats)?).map_err(|e| io_err(&path, e))?;
    Ok(())
}

pub fn oracle(
    config: &PipelineConfig,
    corpus: &Path,
    graph: OracleGraph,
    predictions: Option<PathBuf>,
) -> anyhow::Result<()> {
    let splits = load_splits(config)?;
    let g = match graph {
        OracleGraph::Train => &splits.train,
        OracleGraph::TrainValid => &splits.train_valid,
        OracleGraph::Complete => splits.complete(),
    };
    let records: Vec<CorpusRecord> = read_jsonl(corpus)?;
    let lines = oracle_predictions(&records, g);
    let path = match predictions {
        Some(p) => p,
        None => out_dir(config)?.join("predictions.jsonl"),
    };
    write_jsonl(&path, &lines)?;
    eprintln!("wrote {} oracle predictions to {}", lines.len(), path.display());
    Ok(())
}

pub fn eval(
    config: &PipelineConfig,
    corpus: &Path,
    predictions: &Path,
    stats: Option<PathBuf>,
    exact_set: bool,
) -> anyhow::Result<()> {
    let splits = load_splits(config)?;
    let labels = LabelIndex::from_graph(splits.complete());
    let records: Vec<CorpusRecord> = read_jsonl(corpus)?;
    let preds: Vec<PredictionLine> = read_jsonl(predictions)?;
    let stats = stats.or_else(|| {
        let p = config.out.as_ref()?.join("stats.json");
        p.exists().then_some(p)
    });
    let mut discarded = match &stats {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str::<DiscardList>(&text)
                .with_context(|| format!("invalid stats file {}", p.display()))?
                .discarded
        }
        None => Vec::new(),
    };
    // only discarded samples of the split being scored
    let split = records.first().map(|r| r.split);
    discarded.retain(|d| Some(d.split) == split);

    let options = EvalOptions {
        accuracy: if exact_set {
            AccuracyMode::ExactSet
        } else {
            AccuracyMode::Recall
        },
    };
    let (report, _) = evaluate(&records, &preds, &discarded, &labels, options);
    let table = report.table();
    print!("{table}");
    let c = &report.counts;
    eprintln!(
        "samples {} (scored {}, parse failures {}, missing {}, discarded {}, no hard answers {}), unknown prediction ids {}",
        c.samples,
        c.scored,
        c.parse_failures,
        c.missing,
        c.discarded,
        c.without_hard_answers,
        c.unknown_ids.len()
    );
    for id in &c.unknown_ids {
        eprintln!("unknown prediction id: {id}");
    }
    if let Some(out) = &config.out {
        fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
        let json = out.join("report.json");
        fs::write(&json, serde_json::to_string_pretty(&report)?).map_err(|e| io_err(&json, e))?;
        let txt = out.join("report.txt");
        fs::write(&txt, &table).map_err(|e| io_err(&txt, e))?;
    }
    Ok(())
}

pub fn decompose(query: &str) -> anyhow::Result<()> {
    let expr = parse(query)?;
    let chain = compile(&expr)?;
    print!("{chain}");
    let (count, class) = difficulty(&chain);
    println!("type: {}  subqueries: {count}  difficulty: {class}", chain.source_type);
    Ok(())
}

fn ids(set: &EntitySet) -> String {
    set.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
}

pub fn answer(
    config: &PipelineConfig,
    query: Option<&str>,
    queries: Option<&Path>,
    split: EvalSplit,
) -> anyhow::Result<()> {
    let splits = load_splits(config)?;
    let (smaller, larger) = match split {
        EvalSplit::Valid => (&splits.train, &splits.train_valid),
        EvalSplit::Test => (&splits.train_valid, splits.complete()),
    };
    let list = match (query, queries) {
        (Some(q), _) => vec![GroundedQuery::new("query", parse(q)?)],
        (None, Some(path)) => read_queries(path)?,
        (None, None) => anyhow::bail!("give an s-expression or --queries FILE"),
    };
    for q in &list {
        let s = split_answers(&q.expr, smaller, larger)?;
        println!("{}\teasy:{}\thard:{}", q.id, ids(&s.easy), ids(&s.hard));
    }
    Ok(())
}
