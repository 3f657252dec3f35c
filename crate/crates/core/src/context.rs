//! Neighborhood retrieval, token estimates and context completeness.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{answer_chain, inference_path, EntitySet};
use crate::kg::{EntityId, KnowledgeGraph, Triple};
use crate::query::{GroundedQuery, QueryExpr, QueryType};
use crate::render::render_prompt;
use crate::tree::{compile, StepInput, StepKind};

pub const DEFAULT_MAX_TOKENS: usize = 4096;
pub const DEFAULT_PER_RELATION_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenBudget {
    max_tokens: usize,
}

impl TokenBudget {
    pub fn new(max_tokens: usize) -> Result<Self> {
        if max_tokens == 0 {
            return Err(Error::Config("token budget must be positive".into()));
        }
        Ok(TokenBudget { max_tokens })
    }

    pub fn max_tokens(self) -> usize {
        self.max_tokens
    }

    pub fn allows(self, tokens: usize) -> bool {
        tokens <= self.max_tokens
    }
}

impl Default for TokenBudget {
    fn default() -> Self {
        TokenBudget {
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// Word-count proxy for a tokenizer: `ceil(1.3 × words)`.
pub fn estimate_tokens(text: &str) -> usize {
    let words = text.split_whitespace().count();
    (13 * words).div_ceil(10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetrievalOptions {
    /// Relation-wide triples kept for one-hop queries, nearest to the anchor
    /// first.
    pub per_relation_cap: usize,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        RetrievalOptions {
            per_relation_cap: DEFAULT_PER_RELATION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievedContext {
    /// Deduplicated, ordered by (step, head, relation, tail).
    pub triples: Vec<Triple>,
    /// Estimate for the prompt rendered with these triples.
    pub token_estimate: usize,
    /// Set when the estimate exceeds the budget.
    pub truncated: bool,
    /// Candidate triples per projection step, keyed by 1-based step number.
    pub per_step_triples: BTreeMap<usize, Vec<Triple>>,
}

pub fn retrieve(query: &GroundedQuery, graph: &KnowledgeGraph, budget: TokenBudget) -> Result<RetrievedContext> {
    retrieve_with(query, graph, budget, RetrievalOptions::default())
}

pub fn retrieve_with(
    query: &GroundedQuery,
    graph: &KnowledgeGraph,
    budget: TokenBudget,
    options: RetrievalOptions,
) -> Result<RetrievedContext> {
    let per_step_triples = match (&query.expr, query.query_type) {
        (QueryExpr::Proj { relation, child, .. }, QueryType::P1) => {
            let QueryExpr::Entity(anchor) = **child else {
                unreachable!("1p projects an entity");
            };
            BTreeMap::from([(1, one_hop(graph, anchor, *relation, options.per_relation_cap))])
        }
        _ => follow_chain(&query.expr, graph)?,
    };
    let mut seen = BTreeSet::new();
    let mut triples = Vec::new();
    for step in per_step_triples.values() {
        let mut fresh: Vec<Triple> = step.iter().copied().filter(|t| seen.insert(*t)).collect();
        fresh.sort_unstable();
        triples.extend(fresh);
    }
    let token_estimate = estimate_tokens(&render_prompt(&query.expr, &triples, graph));
    Ok(RetrievedContext {
        triples,
        token_estimate,
        truncated: !budget.allows(token_estimate),
        per_step_triples,
    })
}

/// Every triple touching the anchor plus triples labelled by the relation,
/// the latter capped.
fn one_hop(
    graph: &KnowledgeGraph,
    anchor: EntityId,
    relation: crate::kg::RelationId,
    cap: usize,
) -> Vec<Triple> {
    let mut out: Vec<Triple> = graph.neighbors(anchor).map(<[_]>::to_vec).unwrap_or_default();
    let mut others: Vec<Triple> = graph
        .by_relation(relation)
        .iter()
        .copied()
        .filter(|t| !t.touches(anchor))
        .collect();
    if others.len() > cap {
        let dist = distances(graph, anchor);
        let d = |e: EntityId| dist.get(&e).copied().unwrap_or(usize::MAX);
        others.sort_by_key(|t| (d(t.head).min(d(t.tail)), *t));
        others.truncate(cap);
    }
    out.extend(others);
    out.sort_unstable();
    out
}

/// Undirected hop distance from `source`.
fn distances(graph: &KnowledgeGraph, source: EntityId) -> HashMap<EntityId, usize> {
    let mut dist = HashMap::from([(source, 0)]);
    let mut queue = VecDeque::from([source]);
    while let Some(e) = queue.pop_front() {
        let d = dist[&e];
        for t in graph.neighbors(e).unwrap_or_default() {
            let other = if t.head == e { t.tail } else { t.head };
            if let std::collections::hash_map::Entry::Vacant(v) = dist.entry(other) {
                v.insert(d + 1);
                queue.push_back(other);
            }
        }
    }
    dist
}

/// Walks the decomposition chain: each projection contributes all triples
/// leaving its current frontier along its relation; joins filter the
/// frontiers exactly as the executor does.
fn follow_chain(expr: &QueryExpr, graph: &KnowledgeGraph) -> Result<BTreeMap<usize, Vec<Triple>>> {
    let chain = compile(expr)?;
    let eval = answer_chain(&chain, graph)?;
    let mut out = BTreeMap::new();
    for (i, step) in chain.steps.iter().enumerate() {
        if step.kind != StepKind::Projection {
            continue;
        }
        let Some((relation, inverse)) = step.relation else {
            continue;
        };
        let frontier = match &step.inputs[0] {
            StepInput::Entity(e) => EntitySet::singleton(*e),
            StepInput::Var(v) => eval.bindings.get(v).cloned().unwrap_or_default(),
        };
        let mut found = Vec::new();
        for s in frontier.iter() {
            if inverse {
                found.extend(graph.heads(s, relation).iter().map(|&h| Triple::new(h, relation, s)));
            } else {
                found.extend(graph.tails(s, relation).iter().map(|&t| Triple::new(s, relation, t)));
            }
        }
        found.sort_unstable();
        out.insert(i + 1, found);
    }
    Ok(out)
}

/// Share of the inference-path triples on `reference` that appear in the
/// context. One-hop queries count as complete.
pub fn completeness(query: &GroundedQuery, context: &[Triple], reference: &KnowledgeGraph) -> Result<f64> {
    let chain = compile(&query.expr)?;
    let eval = answer_chain(&chain, reference)?;
    if eval.final_answers.is_empty() {
        return Err(Error::EmptyAnswer);
    }
    if query.query_type == QueryType::P1 {
        return Ok(1.0);
    }
    let path = inference_path(&chain, &eval, reference);
    if path.is_empty() {
        return Ok(1.0);
    }
    let present: BTreeSet<&Triple> = context.iter().collect();
    let hit = path.iter().filter(|t| present.contains(t)).count();
    Ok(hit as f64 / path.len() as f64)
}
