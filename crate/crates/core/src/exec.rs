//! Brute-force symbolic evaluation over a [`KnowledgeGraph`].
//!
//! This is the ground truth for answers, the easy/hard protocol and the
//! oracle answerer used in end-to-end tests.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::query::{QueryExpr, FREE_VAR};
use crate::render;
use crate::tree::{compile, DecompositionChain, StepInput, StepKind};

/// Sorted, duplicate-free set of entity ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntitySet(Vec<EntityId>);

impl EntitySet {
    pub fn new() -> Self {
        EntitySet(Vec::new())
    }

    pub fn singleton(id: EntityId) -> Self {
        EntitySet(vec![id])
    }

    fn from_unsorted(mut v: Vec<EntityId>) -> Self {
        v.sort_unstable();
        v.dedup();
        EntitySet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[EntityId] {
        &self.0
    }

    pub fn union(&self, other: &EntitySet) -> EntitySet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        EntitySet(out)
    }

    pub fn intersection(&self, other: &EntitySet) -> EntitySet {
        EntitySet(self.0.iter().copied().filter(|&e| other.contains(e)).collect())
    }

    pub fn difference(&self, other: &EntitySet) -> EntitySet {
        EntitySet(self.0.iter().copied().filter(|&e| !other.contains(e)).collect())
    }

    pub fn is_subset(&self, other: &EntitySet) -> bool {
        self.0.iter().all(|&e| other.contains(e))
    }

    pub fn is_disjoint(&self, other: &EntitySet) -> bool {
        self.0.iter().all(|&e| !other.contains(e))
    }
}

impl FromIterator<EntityId> for EntitySet {
    fn from_iter<I: IntoIterator<Item = EntityId>>(iter: I) -> Self {
        EntitySet::from_unsorted(iter.into_iter().collect())
    }
}

/// Answers retrievable from the smaller graph (easy) and the rest (hard).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSplit {
    pub easy: EntitySet,
    pub hard: EntitySet,
}

impl AnswerSplit {
    pub fn all(&self) -> EntitySet {
        self.easy.union(&self.hard)
    }
}

fn check_vocabulary(expr: &QueryExpr, graph: &KnowledgeGraph) -> Result<()> {
    let mut err = None;
    expr.visit(&mut |e| {
        if err.is_some() {
            return;
        }
        match e {
            QueryExpr::Entity(id) if !graph.has_entity(*id) => err = Some(Error::UnknownEntity(*id)),
            QueryExpr::Proj { relation, .. } if !graph.has_relation(*relation) => {
                err = Some(Error::UnknownRelation(*relation))
            }
            _ => {}
        }
    });
    err.map_or(Ok(()), Err)
}

fn project(graph: &KnowledgeGraph, input: &EntitySet, relation: RelationId, inverse: bool) -> EntitySet {
    let mut out = Vec::new();
    for e in input.iter() {
        if inverse {
            out.extend_from_slice(graph.heads(e, relation));
        } else {
            out.extend_from_slice(graph.tails(e, relation));
        }
    }
    EntitySet::from_unsorted(out)
}

/// Exact set semantics of `expr` on `graph`.
pub fn answer(expr: &QueryExpr, graph: &KnowledgeGraph) -> Result<EntitySet> {
    check_vocabulary(expr, graph)?;
    Ok(answer_unchecked(expr, graph))
}

/// [`answer`] without the vocabulary check. Unknown ids behave as isolated
/// entities or empty relations.
pub fn answer_unchecked(expr: &QueryExpr, graph: &KnowledgeGraph) -> EntitySet {
    match expr {
        QueryExpr::Entity(e) => EntitySet::singleton(*e),
        QueryExpr::Proj {
            relation,
            inverse,
            child,
        } => project(graph, &answer_unchecked(child, graph), *relation, *inverse),
        QueryExpr::And(cs) => {
            let mut positive: Option<EntitySet> = None;
            for c in cs.iter().filter(|c| !c.negated) {
                let s = answer_unchecked(&c.expr, graph);
                positive = Some(match positive {
                    None => s,
                    Some(acc) => acc.intersection(&s),
                });
            }
            let mut out = positive.unwrap_or_default();
            for c in cs.iter().filter(|c| c.negated) {
                if out.is_empty() {
                    break;
                }
                out = out.difference(&answer_unchecked(&c.expr, graph));
            }
            out
        }
        QueryExpr::Or(children) => children
            .iter()
            .map(|c| answer_unchecked(c, graph))
            .fold(EntitySet::new(), |acc, s| acc.union(&s)),
    }
}

/// Result of evaluating a chain step by step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainEvaluation {
    /// Output of each step, in chain order.
    pub steps: Vec<EntitySet>,
    pub bindings: BTreeMap<String, EntitySet>,
    pub final_answers: EntitySet,
}

fn resolve(input: &StepInput, bindings: &BTreeMap<String, EntitySet>) -> Result<EntitySet> {
    match input {
        StepInput::Entity(e) => Ok(EntitySet::singleton(*e)),
        StepInput::Var(name) => bindings
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnboundVariable(name.clone())),
    }
}

pub fn answer_chain(chain: &DecompositionChain, graph: &KnowledgeGraph) -> Result<ChainEvaluation> {
    let mut bindings = BTreeMap::new();
    let mut steps = Vec::with_capacity(chain.steps.len());
    for step in &chain.steps {
        for input in &step.inputs {
            if let StepInput::Entity(e) = input {
                if !graph.has_entity(*e) {
                    return Err(Error::UnknownEntity(*e));
                }
            }
        }
        let value = match step.kind {
            StepKind::Projection => {
                let (relation, inverse) = step
                    .relation
                    .ok_or_else(|| Error::Structure("projection step without relation".into()))?;
                if !graph.has_relation(relation) {
                    return Err(Error::UnknownRelation(relation));
                }
                let input = resolve(&step.inputs[0], &bindings)?;
                project(graph, &input, relation, inverse)
            }
            kind => {
                let [a, b] = step.inputs.as_slice() else {
                    return Err(Error::Structure(format!("{kind} step needs two inputs")));
                };
                let (a, b) = (resolve(a, &bindings)?, resolve(b, &bindings)?);
                match kind {
                    StepKind::Intersection => a.intersection(&b),
                    StepKind::Union => a.union(&b),
                    _ => a.difference(&b),
                }
            }
        };
        bindings.insert(step.output.clone(), value.clone());
        steps.push(value);
    }
    let final_answers = bindings
        .get(FREE_VAR)
        .cloned()
        .ok_or_else(|| Error::UnboundVariable(FREE_VAR.into()))?;
    Ok(ChainEvaluation {
        steps,
        bindings,
        final_answers,
    })
}

/// Triples that support the final answers of an evaluated chain: a
/// backward pass from `v?` that keeps only projection edges ending in an
/// entity still needed downstream. Negated inputs contribute nothing.
pub fn inference_path(
    chain: &DecompositionChain,
    eval: &ChainEvaluation,
    graph: &KnowledgeGraph,
) -> BTreeSet<Triple> {
    let mut needed: HashMap<String, EntitySet> = HashMap::new();
    needed.insert(FREE_VAR.to_string(), eval.final_answers.clone());
    let require = |needed: &mut HashMap<String, EntitySet>, input: &StepInput, set: EntitySet| {
        if let StepInput::Var(name) = input {
            let slot = needed.entry(name.clone()).or_default();
            *slot = slot.union(&set);
        }
    };
    let mut path = BTreeSet::new();
    for step in chain.steps.iter().rev() {
        let Some(need) = needed.get(&step.output).cloned() else {
            continue;
        };
        if need.is_empty() {
            continue;
        }
        match step.kind {
            StepKind::Projection => {
                let Some((relation, inverse)) = step.relation else {
                    continue;
                };
                let input = resolve(&step.inputs[0], &eval.bindings).unwrap_or_default();
                let mut used = Vec::new();
                for s in input.iter() {
                    let reached = if inverse {
                        graph.heads(s, relation)
                    } else {
                        graph.tails(s, relation)
                    };
                    let mut hit = false;
                    for &o in reached.iter().filter(|&&o| need.contains(o)) {
                        hit = true;
                        path.insert(if inverse {
                            Triple::new(o, relation, s)
                        } else {
                            Triple::new(s, relation, o)
                        });
                    }
                    if hit {
                        used.push(s);
                    }
                }
                require(&mut needed, &step.inputs[0], used.into_iter().collect());
            }
            StepKind::Intersection => {
                require(&mut needed, &step.inputs[0], need.clone());
                require(&mut needed, &step.inputs[1], need);
            }
            StepKind::NegatedIntersection => require(&mut needed, &step.inputs[0], need),
            StepKind::Union => {
                for input in &step.inputs {
                    let bound = resolve(input, &eval.bindings).unwrap_or_default();
                    require(&mut needed, input, need.intersection(&bound));
                }
            }
        }
    }
    path
}

/// Splits the answers of `expr` on `larger` into those also answered on
/// `smaller` (easy) and the rest (hard).
pub fn split_answers(
    expr: &QueryExpr,
    smaller: &KnowledgeGraph,
    larger: &KnowledgeGraph,
) -> Result<AnswerSplit> {
    if !smaller.is_subgraph_of(larger) {
        return Err(Error::NotSubset);
    }
    split_answers_nested(expr, smaller, larger)
}

/// [`split_answers`] for graphs already known to be nested.
pub(crate) fn split_answers_nested(
    expr: &QueryExpr,
    smaller: &KnowledgeGraph,
    larger: &KnowledgeGraph,
) -> Result<AnswerSplit> {
    let all = answer(expr, larger)?;
    Ok(partition(&all, &answer(expr, smaller)?))
}

/// Splits `all` by what the smaller graph already answers. With negation a
/// smaller-graph answer can vanish on the larger graph; such entities are
/// neither easy nor hard.
pub(crate) fn partition(all: &EntitySet, on_smaller: &EntitySet) -> AnswerSplit {
    let easy = all.intersection(on_smaller);
    AnswerSplit {
        hard: all.difference(&easy),
        easy,
    }
}

/// A perfect model: compiles the query, evaluates the chain on `graph` and
/// renders it in the completion format.
pub fn oracle_answer(query: &QueryExpr, graph: &KnowledgeGraph) -> Result<String> {
    let chain = compile(query)?;
    let eval = answer_chain(&chain, graph)?;
    Ok(render::render_completion(
        &chain,
        &eval,
        graph,
        render::DEFAULT_STEP_DISPLAY_CAP,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse;

    // a=0 b=1 c=2 d=3, r=0 s=1
    fn three_triples() -> KnowledgeGraph {
        KnowledgeGraph::from_triples([
            Triple::new(0, 0, 1),
            Triple::new(0, 0, 2),
            Triple::new(3, 1, 1),
        ])
    }

    fn set(ids: &[EntityId]) -> EntitySet {
        ids.iter().copied().collect()
    }

    #[test]
    fn single_projection() {
        let g = KnowledgeGraph::from_triples([Triple::new(0, 0, 1)]);
        assert_eq!(answer(&parse("(p 0 (e 0))").unwrap(), &g).unwrap(), set(&[1]));
        assert_eq!(answer(&parse("(pi 0 (e 1))").unwrap(), &g).unwrap(), set(&[0]));
    }

    #[test]
    fn intersection_on_three_triples() {
        let g = three_triples();
        let e = parse("(and (p 0 (e 0)) (p 1 (e 3)))").unwrap();
        assert_eq!(answer(&e, &g).unwrap(), set(&[1]));
    }

    #[test]
    fn self_difference_is_empty() {
        let g = three_triples();
        let e = parse("(and (p 0 (e 0)) (not (p 0 (e 0))))").unwrap();
        assert!(answer(&e, &g).unwrap().is_empty());
    }

    #[test]
    fn union_and_empty_propagation() {
        let g = three_triples();
        assert_eq!(
            answer(&parse("(or (p 0 (e 0)) (p 1 (e 3)))").unwrap(), &g).unwrap(),
            set(&[1, 2])
        );
        assert!(answer(&parse("(p 1 (p 0 (e 3)))").unwrap(), &g).unwrap().is_empty());
    }

    #[test]
    fn unknown_ids_are_errors() {
        let g = three_triples();
        assert!(matches!(
            answer(&parse("(p 0 (e 99))").unwrap(), &g),
            Err(Error::UnknownEntity(99))
        ));
        assert!(matches!(
            answer(&parse("(p 7 (e 0))").unwrap(), &g),
            Err(Error::UnknownRelation(7))
        ));
    }

    #[test]
    fn chain_on_one_hop() {
        let g = three_triples();
        let e = parse("(p 0 (e 0))").unwrap();
        let eval = answer_chain(&compile(&e).unwrap(), &g).unwrap();
        assert_eq!(eval.final_answers, answer(&e, &g).unwrap());
    }

    #[test]
    fn chain_bindings_on_intersection() {
        let g = three_triples();
        let e = parse("(and (p 0 (e 0)) (p 1 (e 3)))").unwrap();
        let chain = compile(&e).unwrap();
        let eval = answer_chain(&chain, &g).unwrap();
        assert_eq!(eval.bindings["v1"], set(&[1, 2]));
        assert_eq!(eval.bindings["v2"], set(&[1]));
        assert_eq!(eval.final_answers, set(&[1]));
    }

    #[test]
    fn unbound_variable_is_reported() {
        let mut chain = compile(&parse("(p 0 (p 0 (e 0)))").unwrap()).unwrap();
        chain.steps.remove(0);
        assert!(matches!(
            answer_chain(&chain, &three_triples()),
            Err(Error::UnboundVariable(v)) if v == "v1"
        ));
    }

    #[test]
    fn split_with_equal_graphs_has_no_hard() {
        let g = three_triples();
        let s = split_answers(&parse("(p 0 (e 0))").unwrap(), &g, &g).unwrap();
        assert_eq!(s.easy, set(&[1, 2]));
        assert!(s.hard.is_empty());
    }

    #[test]
    fn held_out_triple_gives_hard_answer() {
        let small = three_triples();
        let large = small.merge(&[Triple::new(0, 0, 3)]);
        let s = split_answers(&parse("(p 0 (e 0))").unwrap(), &small, &large).unwrap();
        assert_eq!(s.hard, set(&[3]));
        assert!(matches!(
            split_answers(&parse("(p 0 (e 0))").unwrap(), &large, &small),
            Err(Error::NotSubset)
        ));
    }

    #[test]
    fn negation_can_drop_an_easy_answer() {
        // 0 -r-> {1,2}; the larger graph adds 3 -s-> 2, which the negated
        // branch then removes.
        let small = KnowledgeGraph::from_triples([
            Triple::new(0, 0, 1),
            Triple::new(0, 0, 2),
            Triple::new(3, 1, 4),
        ]);
        let large = small.merge(&[Triple::new(3, 1, 2)]);
        let e = parse("(and (p 0 (e 0)) (not (p 1 (e 3))))").unwrap();
        let s = split_answers(&e, &small, &large).unwrap();
        assert_eq!(s.easy, set(&[1]));
        assert!(s.hard.is_empty());
        assert_eq!(s.all(), answer(&e, &large).unwrap());
    }

    #[test]
    fn inference_path_follows_answers() {
        // 2i: only the edges into the answer are on the path.
        let g = three_triples();
        let e = parse("(and (p 0 (e 0)) (p 1 (e 3)))").unwrap();
        let chain = compile(&e).unwrap();
        let eval = answer_chain(&chain, &g).unwrap();
        let path = inference_path(&chain, &eval, &g);
        assert_eq!(
            path.into_iter().collect::<Vec<_>>(),
            vec![Triple::new(0, 0, 1), Triple::new(3, 1, 1)]
        );
    }

    #[test]
    fn inference_path_prunes_dead_ends() {
        // 2p: 0 -r-> {1,2}; only 1 continues via s to 4.
        let g = KnowledgeGraph::from_triples([
            Triple::new(0, 0, 1),
            Triple::new(0, 0, 2),
            Triple::new(1, 1, 4),
        ]);
        let e = parse("(p 1 (p 0 (e 0)))").unwrap();
        let chain = compile(&e).unwrap();
        let eval = answer_chain(&chain, &g).unwrap();
        let path: Vec<_> = inference_path(&chain, &eval, &g).into_iter().collect();
        assert_eq!(path, vec![Triple::new(0, 0, 1), Triple::new(1, 1, 4)]);
    }

    #[test]
    fn set_algebra() {
        let a = set(&[1, 3, 5]);
        let b = set(&[3, 4]);
        assert_eq!(a.union(&b), set(&[1, 3, 4, 5]));
        assert_eq!(a.intersection(&b), set(&[3]));
        assert_eq!(a.difference(&b), set(&[1, 5]));
        assert!(set(&[3]).is_subset(&a));
        assert!(set(&[2]).is_disjoint(&a));
        assert_eq!(set(&[5, 1, 5]).as_slice(), &[1, 5]);
    }
}
