//! Shared fixtures for the criterion benchmarks.

use kgreason_core::query::sample_queries;
use kgreason_core::synth::random_graph;
use kgreason_core::{GroundedQuery, KnowledgeGraph, QueryType};

/// Graph of the size used by the equivalence sweeps.
pub fn sweep_graph() -> KnowledgeGraph {
    random_graph(100, 8, 600, 42)
}

/// `n` sampled queries of every benchmark type.
pub fn queries_per_type(graph: &KnowledgeGraph, n: usize) -> Vec<(QueryType, Vec<GroundedQuery>)> {
    QueryType::ALL
        .iter()
        .map(|&t| (t, sample_queries(graph, t, n, 7).expect("dense graph samples")))
        .collect()
}
