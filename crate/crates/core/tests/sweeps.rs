//! Seeded sweeps over sampled queries for the pipeline invariants.

use std::collections::BTreeSet;

use kgreason_core::context::{retrieve_with, RetrievalOptions};
use kgreason_core::corpus::{build_corpus, CorpusConfig, Split};
use kgreason_core::eval::{parse_prediction, LabelIndex};
use kgreason_core::pipeline::{sample_split, SamplingPlan};
use kgreason_core::query::sample_queries;
use kgreason_core::synth::{random_graph, random_splits};
use kgreason_core::{answer, answer_chain, compile, retrieve, split_answers, QueryType, TokenBudget, Triple};

#[test]
fn answer_split_partitions_larger_answers() {
    let splits = random_splits(100, 8, 900, 0.1, 21);
    let plan = SamplingPlan::new(20, 5);
    for split in [Split::Valid, Split::Test] {
        let (_, smaller, larger) = split.graphs(&splits);
        for q in sample_split(&splits, split, &plan).unwrap() {
            let s = split_answers(&q.expr, smaller, larger).unwrap();
            assert!(s.easy.is_disjoint(&s.hard), "{}", q.id);
            assert_eq!(s.all(), answer(&q.expr, larger).unwrap(), "{}", q.id);
            assert!(!s.hard.is_empty());
        }
    }
}

/// Every STEP line lists a prefix of the executor binding and FINAL lists
/// the full answer set.
#[test]
fn completions_agree_with_executor() {
    let splits = random_splits(100, 8, 900, 0.1, 3);
    let plan = SamplingPlan::new(10, 8);
    let mut tagged = Vec::new();
    for split in Split::ALL {
        tagged.extend(sample_split(&splits, split, &plan).unwrap().into_iter().map(|q| (split, q)));
    }
    let corpus = build_corpus(&splits, &tagged, &CorpusConfig::default()).unwrap();
    let complete = splits.complete();
    let labels = LabelIndex::from_graph(complete);
    assert_eq!(corpus.samples.len() + corpus.stats.total.discarded, tagged.len());
    for s in &corpus.samples {
        let (_, _, larger) = s.split.graphs(&splits);
        let chain = compile(&s.query.expr).unwrap();
        let eval = answer_chain(&chain, larger).unwrap();
        let lines: Vec<&str> = s.completion.lines().collect();
        assert_eq!(lines.len(), chain.steps.len() + 1);
        for (line, value) in lines.iter().zip(&eval.steps) {
            let shown = parse_prediction("", &line.replacen(" = ", " FINAL: ", 1), &labels).parsed;
            assert!(shown.len() <= 16);
            assert!(shown.iter().all(|e| value.contains(*e)), "{line}");
        }
        let final_set = parse_prediction(&s.query.id, &s.completion, &labels).parsed;
        assert_eq!(final_set, eval.final_answers.as_slice());
        assert_eq!(s.answers.all(), eval.final_answers);
        assert!(s.token_estimate <= 4096);
    }
}

#[test]
fn train_completions_stay_on_train_graph() {
    let splits = random_splits(100, 8, 900, 0.2, 11);
    let train_entities: BTreeSet<u32> = splits.train.triples().flat_map(|t| [t.head, t.tail]).collect();
    let plan = SamplingPlan::new(10, 2);
    let tagged: Vec<_> = sample_split(&splits, Split::Train, &plan)
        .unwrap()
        .into_iter()
        .map(|q| (Split::Train, q))
        .collect();
    let corpus = build_corpus(&splits, &tagged, &CorpusConfig::default()).unwrap();
    let labels = LabelIndex::from_graph(splits.complete());
    for s in &corpus.samples {
        let final_set = parse_prediction("", &s.completion, &labels).parsed;
        assert!(final_set.iter().all(|e| train_entities.contains(e)));
        assert_eq!(final_set, answer(&s.query.expr, &splits.train).unwrap().as_slice());
    }
}

#[test]
fn one_hop_retrieval_is_the_brute_force_filter() {
    let g = random_graph(100, 8, 600, 42);
    let opts = RetrievalOptions { per_relation_cap: usize::MAX };
    for q in sample_queries(&g, QueryType::P1, 100, 4).unwrap() {
        let (anchor, relation) = (q.anchors[0], q.relations[0]);
        let brute: Vec<Triple> = g
            .triples()
            .filter(|t| t.touches(anchor) || t.relation == relation)
            .copied()
            .collect();
        let ctx = retrieve_with(&q, &g, TokenBudget::default(), opts).unwrap();
        assert_eq!(ctx.triples, brute);
    }
}

#[test]
fn retrieval_is_deterministic() {
    let g = random_graph(100, 8, 600, 42);
    for ty in QueryType::ALL {
        for q in sample_queries(&g, ty, 10, 6).unwrap() {
            let a = retrieve(&q, &g, TokenBudget::default()).unwrap();
            let b = retrieve(&q, &g, TokenBudget::default()).unwrap();
            assert_eq!(a, b);
        }
    }
}
