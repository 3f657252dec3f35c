//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use kgreason_core::context::RetrievalOptions;
use kgreason_core::corpus::{read_jsonl, write_jsonl};
use kgreason_core::eval::round_half_up;
use kgreason_core::exec::{answer_unchecked, inference_path};
use kgreason_core::pipeline::{sample_split, SamplingPlan};
use kgreason_core::query::{sample_queries, to_cnf, to_dnf};
use kgreason_core::synth::{random_graph, random_splits};
use kgreason_core::tree::{duplicate_union_branches, to_computation_tree};
use kgreason_core::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

fn sweep_queries(per_type: usize) -> (KnowledgeGraph, Vec<GroundedQuery>) {
    let g = random_graph(100, 8, 600, 42);
    let mut all = Vec::new();
    for ty in QueryType::ALL {
        all.extend(sample_queries(&g, ty, per_type, 1234).expect("sweep graph samples every type"));
    }
    (g, all)
}

fn difficulty_table() -> Outcome {
    let expected = [
        ("1p", "(p 0 (e 0))", 1, DifficultyClass::Easy),
        ("2p", "(p 1 (p 0 (e 0)))", 2, DifficultyClass::Easy),
        ("3p", "(p 2 (p 1 (p 0 (e 0))))", 3, DifficultyClass::Medium),
        ("2i", "(and (p 0 (e 0)) (p 1 (e 1)))", 3, DifficultyClass::Medium),
        ("3i", "(and (p 0 (e 0)) (p 1 (e 1)) (p 2 (e 2)))", 5, DifficultyClass::Hard),
        ("pi", "(and (p 1 (p 0 (e 0))) (p 2 (e 1)))", 4, DifficultyClass::Hard),
        ("ip", "(p 2 (and (p 0 (e 0)) (p 1 (e 1))))", 4, DifficultyClass::Hard),
        ("2u", "(or (p 0 (e 0)) (p 1 (e 1)))", 3, DifficultyClass::Medium),
        ("up", "(p 2 (or (p 0 (e 0)) (p 1 (e 1))))", 4, DifficultyClass::Hard),
        ("2in", "(and (p 0 (e 0)) (not (p 1 (e 1))))", 3, DifficultyClass::Medium),
        ("3in", "(and (p 0 (e 0)) (p 1 (e 1)) (not (p 2 (e 2))))", 5, DifficultyClass::Hard),
        ("inp", "(p 2 (and (p 0 (e 0)) (not (p 1 (e 1)))))", 4, DifficultyClass::Hard),
        ("pin", "(and (p 1 (p 0 (e 0))) (not (p 2 (e 1))))", 4, DifficultyClass::Hard),
        ("pni", "(and (not (p 1 (p 0 (e 0)))) (p 2 (e 1)))", 4, DifficultyClass::Hard),
    ];
    let start = Instant::now();
    let mut bad = Vec::new();
    for (tag, text, count, class) in expected {
        let expr = parse(text).expect("parses");
        let chain = compile(&expr).expect("compiles");
        let got = difficulty(&chain);
        if classify(&expr).tag() != tag || got != (count, class) {
            bad.push(format!("{tag}: classified {} got {got:?}", classify(&expr)));
        }
    }
    let fast = start.elapsed() < Duration::from_secs(1);
    outcome(bad.is_empty() && fast, format!("14 types, mismatches {bad:?}, under 1s: {fast}"))
}

fn chain_equivalence() -> Outcome {
    let start = Instant::now();
    let (g, queries) = sweep_queries(200);
    let mut ok = 0;
    for q in &queries {
        let chain = compile(&q.expr).expect("compiles");
        let eval = answer_chain(&chain, &g).expect("evaluates");
        if eval.final_answers == answer(&q.expr, &g).expect("answers") {
            ok += 1;
        }
    }
    let fast = start.elapsed() < Duration::from_secs(30);
    outcome(
        ok == queries.len() && fast,
        format!("{ok}/{} chain == direct, under 30s: {fast}", queries.len()),
    )
}

fn normal_forms() -> Outcome {
    let start = Instant::now();
    let (g, queries) = sweep_queries(200);
    let mut ok = 0;
    for q in &queries {
        let direct = answer_unchecked(&q.expr, &g);
        let merged = duplicate_union_branches(&to_computation_tree(&q.expr).expect("tree")).to_expr();
        if answer_unchecked(&to_dnf(&q.expr), &g) == direct
            && answer_unchecked(&to_cnf(&q.expr), &g) == direct
            && answer_unchecked(&merged, &g) == direct
        {
            ok += 1;
        }
    }
    let fast = start.elapsed() < Duration::from_secs(30);
    outcome(
        ok == queries.len() && fast,
        format!("{ok}/{} dnf/cnf/union-merge preserve answers, under 30s: {fast}", queries.len()),
    )
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_kgreason"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn oracle_ceiling() -> Outcome {
    let start = Instant::now();
    let work = tempfile::tempdir().expect("tempdir");
    let dataset = toy_dir();
    let (d, o) = (dataset.to_str().unwrap(), work.path().to_str().unwrap());
    let corpus = work.path().join("eval_test.jsonl");
    let preds = work.path().join("predictions.jsonl");
    let steps: [Vec<&str>; 4] = [
        vec!["sample", "--dataset", d, "--out", o],
        vec!["build", "--dataset", d, "--out", o],
        vec!["oracle", "--dataset", d, "--out", o, "--corpus", corpus.to_str().unwrap()],
        vec![
            "eval",
            "--dataset",
            d,
            "--out",
            o,
            "--corpus",
            corpus.to_str().unwrap(),
            "--predictions",
            preds.to_str().unwrap(),
        ],
    ];
    for args in &steps {
        if let Err(e) = run_cli(args) {
            return outcome(false, e);
        }
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(work.path().join("report.json")).expect("report.json"))
            .expect("report json");
    let mut bad = Vec::new();
    for ty in QueryType::ALL {
        let s = &report["per_type"][ty.tag()];
        let (mrr, acc) = (s["mrr"].as_f64(), s["accuracy"].as_f64());
        if mrr != Some(100.0) || acc != Some(100.0) {
            bad.push(format!("{ty}: mrr {mrr:?} acc {acc:?}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!("toy test split, 14 types at 100.0 / 100.0, failures {bad:?}, {:.1}s (limit 120s)", elapsed.as_secs_f64()),
    )
}

/// Independent filtered reciprocal-rank oracle: drop every correct entity
/// other than `a` from the list, then take `a`'s 1-based position.
fn oracle_mrr(list: &[u32], easy: &[u32], hard: &[u32]) -> f64 {
    let correct: BTreeSet<u32> = easy.iter().chain(hard).copied().collect();
    let mut seen = BTreeSet::new();
    let list: Vec<u32> = list.iter().copied().filter(|e| seen.insert(*e)).collect();
    let total: f64 = hard
        .iter()
        .map(|&a| {
            let filtered: Vec<u32> = list.iter().copied().filter(|e| *e == a || !correct.contains(e)).collect();
            filtered.iter().position(|e| *e == a).map_or(0.0, |p| 1.0 / (p + 1) as f64)
        })
        .sum();
    total / hard.len() as f64
}

type Case<'a> = (&'a [u32], &'a [u32], &'a [u32]);

fn filtered_mrr() -> Outcome {
    let split = |easy: &[u32], hard: &[u32]| AnswerSplit {
        easy: easy.iter().copied().collect(),
        hard: hard.iter().copied().collect(),
    };
    let mut lines = Vec::new();
    let mut pass = true;

    // literal hand example: hard at positions 1 and 3, easy at 2
    let got = mrr_filtered(&[10, 20, 30], &split(&[20], &[10, 30])).expect("non-empty hard");
    let ok = got == 0.75;
    pass &= ok;
    lines.push(format!("hand case expected 0.75 got {got}"));

    // (ranked list, easy, hard)
    let siblings: [Case; 5] = [
        (&[10, 99, 30], &[20], &[10, 30]),
        (&[99, 98, 10], &[], &[10]),
        (&[20, 99, 10, 30], &[20], &[10, 30, 40]),
        (&[], &[1], &[2, 3]),
        (&[10, 10, 99, 20], &[], &[10, 20]),
    ];
    for (list, easy, hard) in siblings {
        let want = oracle_mrr(list, easy, hard);
        let got = mrr_filtered(list, &split(easy, hard)).expect("non-empty hard");
        let ok = got == want;
        pass &= ok;
        lines.push(format!("{list:?} want {want:.4} got {got:.4}{}", if ok { "" } else { " !" }));
    }
    outcome(pass, lines.join("; "))
}

fn aggregate_reproduction() -> Outcome {
    let row = [
        ("1p", 93.5),
        ("2p", 73.5),
        ("3p", 59.6),
        ("2i", 92.3),
        ("3i", 82.3),
        ("pi", 76.8),
        ("ip", 75.9),
        ("2u", 74.6),
        ("up", 60.4),
        ("2in", 81.2),
        ("3in", 61.6),
        ("inp", 52.0),
        ("pin", 43.5),
        ("pni", 41.7),
    ];
    let per_type: BTreeMap<QueryType, f64> = row.iter().map(|(t, v)| (t.parse().unwrap(), *v)).collect();
    let agg = eval::Aggregates::from_per_type(&per_type);
    let checks = [
        ("avg_p", agg.avg_p, 82.6),
        ("avg_ood", agg.avg_ood, 71.9),
        ("avg_n", agg.avg_n, 56.9),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, got, want) in checks {
        let got = round_half_up(got.unwrap_or(f64::NAN));
        let ok = (got - want).abs() <= 0.1 + 1e-9;
        pass &= ok;
        parts.push(format!("{name} {got:.1} vs {want} {}", if ok { "ok" } else { "off" }));
    }
    outcome(pass, format!("tolerance 0.1: {}", parts.join(", ")))
}

fn curriculum_stage(seed: u64, dir: &Path) -> (Vec<CorpusRecord>, Vec<u8>) {
    let splits = random_splits(400, 12, 8000, 0.1, 77);
    let plan = SamplingPlan::new(420, seed);
    let tagged: Vec<(Split, GroundedQuery)> = sample_split(&splits, Split::Train, &plan)
        .expect("samples")
        .into_iter()
        .map(|q| (Split::Train, q))
        .collect();
    let corpus = build_corpus(&splits, &tagged, &CorpusConfig::default()).expect("builds");
    let records: Vec<CorpusRecord> = corpus.split(Split::Train).map(|s| s.to_record()).collect();
    let mut schedule = CurriculumSchedule::with_seed(seed);
    for spec in &mut schedule.stages {
        spec.size = Some(1000);
    }
    schedule.disjoint = false;
    let stages = schedule_stages(&records, &schedule).expect("schedules");
    let path = dir.join(format!("stage1-{}.jsonl", fs::read_dir(dir).unwrap().count()));
    write_jsonl(&path, stages[0].iter().copied()).expect("writes");
    let bytes = fs::read(&path).expect("reads");
    (read_jsonl(&path).expect("reads back"), bytes)
}

fn curriculum_mix() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let (stage, first) = curriculum_stage(5, dir.path());
    let (_, second) = curriculum_stage(5, dir.path());
    let mut counts = [0usize; 3];
    for r in &stage {
        counts[usize::from(r.difficulty) - 1] += 1;
    }
    let within = counts.iter().zip([800usize, 100, 100]).all(|(c, w)| c.abs_diff(w) <= 1);
    let same = first == second;
    outcome(
        within && same && stage.len() == 1000,
        format!("stage 1 easy/medium/hard {counts:?} (want 800/100/100 ±1), rerun bytes identical: {same}"),
    )
}

fn token_budget() -> Outcome {
    let splits = SplitGraphs::load(toy_dir()).expect("toy dataset");
    let plan = SamplingPlan::new(50, 0);
    let mut tagged = Vec::new();
    for split in Split::ALL {
        tagged.extend(sample_split(&splits, split, &plan).expect("samples").into_iter().map(|q| (split, q)));
    }
    let full = build_corpus(&splits, &tagged, &CorpusConfig::default()).expect("builds");
    let over = full
        .samples
        .iter()
        .filter(|s| estimate_tokens(&format!("{}\n{}", s.prompt, s.completion)) > 4096)
        .count();
    let tiny = CorpusConfig {
        budget: TokenBudget::new(10).unwrap(),
        retrieval: RetrievalOptions::default(),
        ..CorpusConfig::default()
    };
    let small = build_corpus(&splits, &tagged, &tiny).expect("builds");
    let t = small.stats.total;
    let discard_ok = t.discarded == t.input - t.emitted
        && t.input == tagged.len()
        && small.stats.discarded.len() == t.discarded
        && small.samples.len() == t.emitted;
    outcome(
        over == 0 && discard_ok,
        format!(
            "{} emitted at 4096, {over} over budget; budget 10: input {} emitted {} discarded {}",
            full.samples.len(),
            t.input,
            t.emitted,
            t.discarded
        ),
    )
}

fn completeness_metric() -> Outcome {
    let (g, queries) = sweep_queries(30);
    let mut full_ok = 0;
    let (mut removed_total, mut removed_ok) = (0, 0);
    for q in &queries {
        let ctx = retrieve(q, &g, TokenBudget::default()).expect("retrieves");
        if completeness(q, &ctx.triples, &g).expect("non-empty answer") == 1.0 {
            full_ok += 1;
        }
        if q.query_type != QueryType::P1 {
            let chain = compile(&q.expr).unwrap();
            let eval = answer_chain(&chain, &g).unwrap();
            let path = inference_path(&chain, &eval, &g);
            let pruned: Vec<Triple> = ctx.triples.iter().filter(|t| !path.contains(t)).copied().collect();
            removed_total += 1;
            if completeness(q, &pruned, &g).unwrap() == 0.0 {
                removed_ok += 1;
            }
        }
    }
    let half_graph = KnowledgeGraph::from_triples([Triple::new(0, 0, 1), Triple::new(3, 1, 1)]);
    let half_q = GroundedQuery::new("half", parse("(and (p 0 (e 0)) (p 1 (e 3)))").unwrap());
    let half = completeness(&half_q, &[Triple::new(0, 0, 1)], &half_graph).unwrap();
    outcome(
        full_ok == queries.len() && removed_ok == removed_total && half == 0.5,
        format!(
            "complete graph {full_ok}/{} at 1.0; path removed {removed_ok}/{removed_total} at 0.0 (multi-hop types); 2i half case {half}",
            queries.len()
        ),
    )
}

fn round_trip() -> Outcome {
    let (g, queries) = sweep_queries(72);
    let labels = LabelIndex::from_graph(&g);
    let mut ok = 0;
    let n = 1000;
    for q in queries.iter().take(n) {
        let text = oracle_answer(&q.expr, &g).expect("renders");
        let want = answer(&q.expr, &g).unwrap();
        let got = parse_prediction(&q.id, &text, &labels);
        if got.parse_ok && got.parsed == want.as_slice() {
            ok += 1;
        }
    }
    outcome(ok == n, format!("{ok}/{n} FINAL sets recovered"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("subquery-count table", difficulty_table),
        ("chain/direct equivalence", chain_equivalence),
        ("normal-form soundness", normal_forms),
        ("oracle ceiling", oracle_ceiling),
        ("filtered-MRR unit truth", filtered_mrr),
        ("aggregate reproduction", aggregate_reproduction),
        ("curriculum mixes", curriculum_mix),
        ("token budget", token_budget),
        ("completeness metric", completeness_metric),
        ("round trip", round_trip),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
