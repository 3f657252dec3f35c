//! Seeded sampling of grounded queries by walking a template backwards from
//! an answer entity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exec::{answer_unchecked, EntitySet};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::query::expr::{Conjunct, QueryExpr};
use crate::query::{GroundedQuery, QueryType};

pub const DEFAULT_MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOptions {
    /// Attempts per query before giving up.
    pub max_retries: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

/// Samples `n` queries of type `ty` with non-empty answers on `graph`.
///
/// Query `i` uses its own generator seeded with `seed ^ i`, so the output does
/// not depend on scheduling. Ids are `<type>-<index>`.
pub fn sample_queries(
    graph: &KnowledgeGraph,
    ty: QueryType,
    n: usize,
    seed: u64,
) -> Result<Vec<GroundedQuery>> {
    sample_queries_where(graph, ty, n, seed, SampleOptions::default(), |_| true)
}

/// Like [`sample_queries`], additionally rejecting candidates for which
/// `accept` returns false (used to require non-empty hard answers).
pub fn sample_queries_where<F>(
    graph: &KnowledgeGraph,
    ty: QueryType,
    n: usize,
    seed: u64,
    options: SampleOptions,
    accept: F,
) -> Result<Vec<GroundedQuery>>
where
    F: Fn(&QueryExpr) -> bool + Sync,
{
    let template = ty
        .template()
        .ok_or_else(|| Error::Config("cannot sample the `general` type".into()))?;
    let targets: Vec<EntityId> = graph
        .entity_ids()
        .filter(|&e| graph.incoming(e).next().is_some())
        .collect();
    let exhausted = || Error::SamplingExhausted {
        query_type: ty,
        retries: options.max_retries,
    };
    if targets.is_empty() {
        return Err(exhausted());
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let sampler = Sampler {
                graph,
                targets: &targets,
            };
            for _ in 0..options.max_retries {
                let target = *targets.choose(&mut rng).expect("non-empty");
                let Some(expr) = sampler.ground(&template, target, &mut rng) else {
                    continue;
                };
                if !answer_unchecked(&expr, graph).contains(target) || !accept(&expr) {
                    continue;
                }
                return Ok(GroundedQuery::new(format!("{ty}-{i:05}"), expr));
            }
            Err(exhausted())
        })
        .collect()
}

struct Sampler<'a> {
    graph: &'a KnowledgeGraph,
    targets: &'a [EntityId],
}

impl Sampler<'_> {
    /// Instantiates `template` so that `target` is (intended to be) an
    /// answer. Returns `None` when the walk hits a dead end.
    fn ground(&self, template: &QueryExpr, target: EntityId, rng: &mut ChaCha8Rng) -> Option<QueryExpr> {
        match template {
            QueryExpr::Entity(_) => Some(QueryExpr::Entity(target)),
            QueryExpr::Proj { child, .. } => {
                let incoming: Vec<_> = self.graph.incoming(target).collect();
                let edge = incoming.choose(rng)?;
                let sub = self.ground(child, edge.head, rng)?;
                Some(QueryExpr::proj(edge.relation, sub))
            }
            QueryExpr::And(cs) => {
                let mut positives = Vec::new();
                for c in cs.iter().filter(|c| !c.negated) {
                    positives.push(self.ground(&c.expr, target, rng)?);
                }
                if has_duplicates(&positives) {
                    return None;
                }
                // Negated operands are walked back from another entity found
                // by some positive operand, so the negation sits next to the
                // positive support instead of anywhere in the graph.
                let mut negatives = Vec::new();
                if cs.iter().any(|c| c.negated) {
                    let support = positives
                        .iter()
                        .map(|p| answer_unchecked(p, self.graph))
                        .fold(EntitySet::new(), |a, b| a.union(&b));
                    let others: Vec<EntityId> =
                        support.iter().filter(|&e| e != target).collect();
                    for c in cs.iter().filter(|c| c.negated) {
                        let u = *others.choose(rng)?;
                        let neg = self.ground(&c.expr, u, rng)?;
                        if positives.contains(&neg) || negatives.contains(&neg) {
                            return None;
                        }
                        negatives.push(neg);
                    }
                }
                let mut pos_iter = positives.into_iter();
                let mut neg_iter = negatives.into_iter();
                Some(QueryExpr::And(
                    cs.iter()
                        .map(|c| {
                            if c.negated {
                                Conjunct::neg(neg_iter.next().expect("negated operand"))
                            } else {
                                Conjunct::pos(pos_iter.next().expect("positive operand"))
                            }
                        })
                        .collect(),
                ))
            }
            QueryExpr::Or(children) => {
                let mut out = Vec::with_capacity(children.len());
                for (k, c) in children.iter().enumerate() {
                    let anchor = if k == 0 {
                        target
                    } else {
                        self.targets[rng.gen_range(0..self.targets.len())]
                    };
                    out.push(self.ground(c, anchor, rng)?);
                }
                if has_duplicates(&out) {
                    return None;
                }
                Some(QueryExpr::Or(out))
            }
        }
    }
}

fn has_duplicates(exprs: &[QueryExpr]) -> bool {
    exprs
        .iter()
        .enumerate()
        .any(|(i, a)| exprs[i + 1..].contains(a))
}
