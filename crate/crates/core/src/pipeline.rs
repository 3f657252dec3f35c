//! Split-aware sampling and the oracle stand-in for a model, shared by the
//! command line tool and end-to-end tests.

use rayon::prelude::*;

use crate::corpus::{CorpusRecord, Split};
use crate::error::Result;
use crate::eval::{extract_query, PredictionLine};
use crate::exec::{answer_unchecked, oracle_answer};
use crate::kg::{KnowledgeGraph, SplitGraphs};
use crate::query::{sample_queries_where, GroundedQuery, QueryType, SampleOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub types: Vec<QueryType>,
    pub per_type: usize,
    pub seed: u64,
    pub options: SampleOptions,
}

impl SamplingPlan {
    pub fn new(per_type: usize, seed: u64) -> Self {
        SamplingPlan {
            types: QueryType::ALL.to_vec(),
            per_type,
            seed,
            options: SampleOptions::default(),
        }
    }

    fn seed_for(&self, split: Split, ty: QueryType) -> u64 {
        let s = Split::ALL.iter().position(|&x| x == split).unwrap_or(0) as u64 + 1;
        let t = QueryType::ALL.iter().position(|&x| x == ty).unwrap_or(14) as u64 + 1;
        self.seed ^ (s << 56) ^ (t << 48)
    }
}

/// Samples every type in the plan for one split. Train queries only need
/// answers on the train graph; valid and test queries must have at least
/// one answer that the smaller graph misses. Ids are
/// `<split>-<type>-<index>`.
pub fn sample_split(splits: &SplitGraphs, split: Split, plan: &SamplingPlan) -> Result<Vec<GroundedQuery>> {
    let (_, smaller, larger) = split.graphs(splits);
    let mut out = Vec::with_capacity(plan.types.len() * plan.per_type);
    for &ty in &plan.types {
        let accept = |expr: &crate::query::QueryExpr| {
            split == Split::Train
                || !answer_unchecked(expr, larger).is_subset(&answer_unchecked(expr, smaller))
        };
        let queries = sample_queries_where(
            larger,
            ty,
            plan.per_type,
            plan.seed_for(split, ty),
            plan.options,
            accept,
        )?;
        out.extend(
            queries
                .into_iter()
                .map(|q| GroundedQuery::new(format!("{split}-{}", q.id), q.expr)),
        );
    }
    Ok(out)
}

/// Oracle completions for corpus records, answering on `graph`. Records
/// whose query cannot be recovered or answered get an empty output.
pub fn oracle_predictions(records: &[CorpusRecord], graph: &KnowledgeGraph) -> Vec<PredictionLine> {
    records
        .par_iter()
        .map(|r| PredictionLine {
            id: r.id.clone(),
            output_text: extract_query(&r.prompt)
                .and_then(|q| oracle_answer(&q, graph))
                .unwrap_or_default(),
        })
        .collect()
}
