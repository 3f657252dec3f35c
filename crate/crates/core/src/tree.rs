//! Binary tree decomposition of EFO₁ queries.
//!
//! The pipeline is
//!
//! 1. [`to_computation_tree`]: one node per variable and per constant
//!    occurrence, edges oriented child → parent, root `v?`;
//! 2. [`duplicate_union_branches`]: merges union branches that share
//!    structure, `(A∧B)∨(A∧C) ⇒ A∧(B∨C)` and `r(X)∨r(Y) ⇒ r(X∨Y)`;
//! 3. [`binarize`]: splits every n-ary join into left-nested binary joins
//!    with fresh primed variables;
//! 4. [`reverse_level_traversal`]: emits the non-leaf nodes deepest level
//!    first, which yields the subquery chain.
//!
//! The number of emitted subqueries is the difficulty signal used by the
//! curriculum.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId};
use crate::query::{classify, Conjunct, QueryExpr, QueryType, FREE_VAR};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Constant(EntityId),
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JoinKind {
    Intersection,
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Relation { relation: RelationId, inverse: bool },
    Join { kind: JoinKind, negated: bool },
}

/// Edge from `child` into the node that owns it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeEdge {
    pub child: NodeId,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub name: String,
    pub kind: NodeKind,
    /// Incoming edges. A variable has exactly one relation edge (projection)
    /// or at least two join edges of the same kind.
    pub inputs: Vec<TreeEdge>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn join_kind(&self) -> Option<JoinKind> {
        self.inputs.first().and_then(|e| match e.label {
            EdgeLabel::Join { kind, .. } => Some(kind),
            EdgeLabel::Relation { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationTree {
    nodes: Vec<TreeNode>,
    root: NodeId,
}

impl ComputationTree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Node ids in pre-order (parent before children, inputs left to right).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].inputs.iter().rev().map(|e| e.child));
        }
        out
    }

    /// Converts the tree back to an expression.
    pub fn to_expr(&self) -> QueryExpr {
        self.expr_at(self.root)
    }

    fn expr_at(&self, id: NodeId) -> QueryExpr {
        let node = &self.nodes[id];
        if let NodeKind::Constant(e) = node.kind {
            return QueryExpr::Entity(e);
        }
        match node.inputs.as_slice() {
            [TreeEdge {
                child,
                label: EdgeLabel::Relation { relation, inverse },
            }] => QueryExpr::Proj {
                relation: *relation,
                inverse: *inverse,
                child: Box::new(self.expr_at(*child)),
            },
            inputs => match node.join_kind() {
                Some(JoinKind::Union) => {
                    QueryExpr::Or(inputs.iter().map(|e| self.expr_at(e.child)).collect())
                }
                _ => QueryExpr::And(
                    inputs
                        .iter()
                        .map(|e| Conjunct {
                            expr: self.expr_at(e.child),
                            negated: matches!(e.label, EdgeLabel::Join { negated: true, .. }),
                        })
                        .collect(),
                ),
            },
        }
    }

    /// Largest number of inputs on any join node.
    pub fn max_join_arity(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.join_kind().is_some())
            .map(|n| n.inputs.len())
            .max()
            .unwrap_or(0)
    }

    pub fn count_projections(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.join_kind().is_none() && !n.is_leaf())
            .count()
    }

    pub fn count_joins(&self) -> usize {
        self.nodes.iter().filter(|n| n.join_kind().is_some()).count()
    }
}

/// A computation tree whose joins all have exactly two inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryComputationTree(ComputationTree);

impl BinaryComputationTree {
    pub fn tree(&self) -> &ComputationTree {
        &self.0
    }
}

struct Builder {
    nodes: Vec<TreeNode>,
    next_var: usize,
}

impl Builder {
    fn push(&mut self, name: String, kind: NodeKind) -> NodeId {
        self.nodes.push(TreeNode {
            name,
            kind,
            inputs: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn variable(&mut self, is_root: bool) -> NodeId {
        let name = if is_root {
            FREE_VAR.to_string()
        } else {
            self.next_var += 1;
            format!("v{}", self.next_var)
        };
        self.push(name, NodeKind::Variable)
    }

    fn add(&mut self, expr: &QueryExpr, is_root: bool) -> NodeId {
        match expr {
            QueryExpr::Entity(e) => self.push(format!("e{e}"), NodeKind::Constant(*e)),
            QueryExpr::Proj {
                relation,
                inverse,
                child,
            } => {
                let id = self.variable(is_root);
                let c = self.add(child, false);
                self.nodes[id].inputs.push(TreeEdge {
                    child: c,
                    label: EdgeLabel::Relation {
                        relation: *relation,
                        inverse: *inverse,
                    },
                });
                id
            }
            QueryExpr::And(cs) => {
                let id = self.variable(is_root);
                for c in cs {
                    let child = self.add(&c.expr, false);
                    self.nodes[id].inputs.push(TreeEdge {
                        child,
                        label: EdgeLabel::Join {
                            kind: JoinKind::Intersection,
                            negated: c.negated,
                        },
                    });
                }
                id
            }
            QueryExpr::Or(children) => {
                let id = self.variable(is_root);
                for c in children {
                    let child = self.add(c, false);
                    self.nodes[id].inputs.push(TreeEdge {
                        child,
                        label: EdgeLabel::Join {
                            kind: JoinKind::Union,
                            negated: false,
                        },
                    });
                }
                id
            }
        }
    }
}

/// Builds the computation tree of `expr`. Variables are named `v1, v2, ...`
/// in pre-order, the root is `v?`, constants are `e<id>`.
pub fn to_computation_tree(expr: &QueryExpr) -> Result<ComputationTree> {
    if matches!(expr, QueryExpr::Entity(_)) {
        return Err(Error::Structure(
            "a bare constant has no free variable to answer".into(),
        ));
    }
    expr.validate()?;
    let mut b = Builder {
        nodes: Vec::new(),
        next_var: 0,
    };
    let root = b.add(expr, true);
    Ok(ComputationTree {
        nodes: b.nodes,
        root,
    })
}

/// Merges union branches with shared structure:
///
/// * `r(X) ∨ r(Y) ⇒ r(X ∨ Y)` (one converged edge for a repeated relation);
/// * `(A∧B) ∨ (A∧C) ⇒ A ∧ (B∨C)`.
///
/// Applied bottom-up until nothing changes. Answers are preserved.
pub fn duplicate_union_branches(tree: &ComputationTree) -> ComputationTree {
    let merged = merge_unions(&tree.to_expr());
    to_computation_tree(&merged).expect("rewrite keeps a valid, non-constant root")
}

pub fn merge_unions(expr: &QueryExpr) -> QueryExpr {
    let mut current = expr.clone();
    loop {
        let next = merge_once(&current);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn merge_once(expr: &QueryExpr) -> QueryExpr {
    match expr {
        QueryExpr::Entity(_) => expr.clone(),
        QueryExpr::Proj {
            relation,
            inverse,
            child,
        } => QueryExpr::Proj {
            relation: *relation,
            inverse: *inverse,
            child: Box::new(merge_once(child)),
        },
        QueryExpr::And(cs) => QueryExpr::And(
            cs.iter()
                .map(|c| Conjunct {
                    expr: merge_once(&c.expr),
                    negated: c.negated,
                })
                .collect(),
        ),
        QueryExpr::Or(children) => {
            let children: Vec<QueryExpr> = children.iter().map(merge_once).collect();
            merge_projection_branches(&children)
                .or_else(|| factor_common_conjunct(&children))
                .unwrap_or(QueryExpr::Or(children))
        }
    }
}

fn or_of(mut items: Vec<QueryExpr>) -> QueryExpr {
    if items.len() == 1 {
        items.pop().expect("one item")
    } else {
        QueryExpr::Or(items)
    }
}

/// `r(X) ∨ r(Y) ∨ Z ⇒ r(X ∨ Y) ∨ Z` for the first relation that repeats.
fn merge_projection_branches(children: &[QueryExpr]) -> Option<QueryExpr> {
    let key = |e: &QueryExpr| match e {
        QueryExpr::Proj {
            relation, inverse, ..
        } => Some((*relation, *inverse)),
        _ => None,
    };
    let (first, k) = children.iter().enumerate().find_map(|(i, c)| {
        let k = key(c)?;
        children[i + 1..]
            .iter()
            .any(|d| key(d) == Some(k))
            .then_some((i, k))
    })?;
    let mut grouped = Vec::new();
    let mut rest = Vec::new();
    for c in children {
        match c {
            QueryExpr::Proj { child, .. } if key(c) == Some(k) => grouped.push((**child).clone()),
            _ => rest.push(c.clone()),
        }
    }
    let merged = QueryExpr::Proj {
        relation: k.0,
        inverse: k.1,
        child: Box::new(or_of(grouped)),
    };
    rest.insert(first.min(rest.len()), merged);
    Some(or_of(rest))
}

/// `(A∧B) ∨ (A∧C) ∨ Z ⇒ (A ∧ (B∨C)) ∨ Z` for the first conjunct shared by
/// two or more conjunctive branches. Branches whose remainder would have no
/// positive operand are left alone.
fn factor_common_conjunct(children: &[QueryExpr]) -> Option<QueryExpr> {
    let ands: Vec<(usize, &Vec<Conjunct>)> = children
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c {
            QueryExpr::And(cs) => Some((i, cs)),
            _ => None,
        })
        .collect();
    for (pos, &(first_idx, first_cs)) in ands.iter().enumerate() {
        for shared in first_cs {
            let members: Vec<(usize, &Vec<Conjunct>)> = std::iter::once((first_idx, first_cs))
                .chain(
                    ands[pos + 1..]
                        .iter()
                        .copied()
                        .filter(|(_, cs)| cs.contains(shared)),
                )
                .collect();
            if members.len() < 2 {
                continue;
            }
            let mut remainders = Vec::with_capacity(members.len());
            for (_, cs) in &members {
                let mut removed = false;
                let rest: Vec<Conjunct> = cs
                    .iter()
                    .filter(|c| {
                        if !removed && *c == shared {
                            removed = true;
                            false
                        } else {
                            true
                        }
                    })
                    .cloned()
                    .collect();
                remainders.push(rest);
            }
            if remainders.iter().any(|r| r.iter().all(|c| c.negated)) {
                // Covers empty remainders (absorption) and negation-only ones.
                continue;
            }
            let branches: Vec<QueryExpr> = remainders
                .into_iter()
                .map(|mut r| {
                    if r.len() == 1 {
                        r.pop().expect("one operand").expr
                    } else {
                        QueryExpr::And(r)
                    }
                })
                .collect();
            let factored = QueryExpr::And(vec![shared.clone(), Conjunct::pos(or_of(branches))]);
            let member_idx: Vec<usize> = members.iter().map(|(i, _)| *i).collect();
            let mut out = Vec::new();
            for (i, c) in children.iter().enumerate() {
                if i == first_idx {
                    out.push(factored.clone());
                } else if !member_idx.contains(&i) {
                    out.push(c.clone());
                }
            }
            return Some(or_of(out));
        }
    }
    None
}

/// Splits every join with more than two inputs into a left-nested chain of
/// binary joins. Positive inputs come first, then negated ones, each group
/// in declaration order. New join nodes are named `v1'`, `v2'`, ... in
/// pre-order; existing names are kept.
pub fn binarize(tree: &ComputationTree) -> BinaryComputationTree {
    let mut out = ComputationTree {
        nodes: Vec::with_capacity(tree.nodes.len() * 2),
        root: 0,
    };
    let mut fresh = Vec::new();
    out.root = copy_binary(tree, tree.root, &mut out.nodes, &mut fresh);
    let order = out.preorder();
    let mut k = 0;
    for id in order {
        if fresh.contains(&id) {
            k += 1;
            out.nodes[id].name = format!("v{k}'");
        }
    }
    BinaryComputationTree(out)
}

fn copy_binary(
    src: &ComputationTree,
    id: NodeId,
    dst: &mut Vec<TreeNode>,
    fresh: &mut Vec<NodeId>,
) -> NodeId {
    let node = &src.nodes[id];
    let new_id = dst.len();
    dst.push(TreeNode {
        name: node.name.clone(),
        kind: node.kind,
        inputs: Vec::new(),
    });
    let mut inputs: Vec<TreeEdge> = node
        .inputs
        .iter()
        .map(|e| TreeEdge {
            child: copy_binary(src, e.child, dst, fresh),
            label: e.label,
        })
        .collect();
    if inputs.len() > 2 {
        let kind = node.join_kind().expect("only joins have several inputs");
        // stable partition: positives, then negated
        inputs.sort_by_key(|e| matches!(e.label, EdgeLabel::Join { negated: true, .. }));
        let mut acc = inputs[0];
        for edge in &inputs[1..inputs.len() - 1] {
            let split = dst.len();
            dst.push(TreeNode {
                name: String::new(),
                kind: NodeKind::Variable,
                inputs: vec![acc, *edge],
            });
            fresh.push(split);
            acc = TreeEdge {
                child: split,
                label: EdgeLabel::Join {
                    kind,
                    negated: false,
                },
            };
        }
        inputs = vec![acc, *inputs.last().expect("more than two inputs")];
    }
    dst[new_id].inputs = inputs;
    new_id
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Projection,
    Intersection,
    Union,
    /// `first ∧ ¬second`
    NegatedIntersection,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Projection => "projection",
            StepKind::Intersection => "intersection",
            StepKind::Union => "union",
            StepKind::NegatedIntersection => "negated-intersection",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepInput {
    Var(String),
    Entity(EntityId),
}

impl fmt::Display for StepInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepInput::Var(name) => f.write_str(name),
            StepInput::Entity(e) => write!(f, "e{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubqueryStep {
    pub kind: StepKind,
    pub inputs: Vec<StepInput>,
    /// Relation and inverse flag; projections only.
    pub relation: Option<(RelationId, bool)>,
    pub output: String,
}

impl fmt::Display for SubqueryStep {
    /// `<kind> <inputs> [rel=<id>] -> <var>`; inverse relations print as
    /// `rel=<id>^-1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ", self.kind)?;
        for (i, input) in self.inputs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{input}")?;
        }
        if let Some((r, inverse)) = self.relation {
            write!(f, " rel={r}")?;
            if inverse {
                f.write_str("^-1")?;
            }
        }
        write!(f, " -> {}", self.output)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecompositionChain {
    pub steps: Vec<SubqueryStep>,
    pub subquery_count: usize,
    pub source_type: QueryType,
}

impl DecompositionChain {
    /// One `STEP <k>: ...` line per subquery, 1-based.
    pub fn lines(&self) -> impl Iterator<Item = String> + '_ {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("STEP {}: {s}", i + 1))
    }
}

impl fmt::Display for DecompositionChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Emits the non-leaf nodes of `btree` deepest level first, left to right
/// within a level.
pub fn reverse_level_traversal(btree: &BinaryComputationTree) -> DecompositionChain {
    let tree = &btree.0;
    let mut depth = vec![0usize; tree.nodes.len()];
    let mut queue = VecDeque::from([tree.root]);
    while let Some(n) = queue.pop_front() {
        for e in &tree.nodes[n].inputs {
            depth[e.child] = depth[n] + 1;
            queue.push_back(e.child);
        }
    }
    let mut order: Vec<(usize, usize, NodeId)> = tree
        .preorder()
        .into_iter()
        .enumerate()
        .filter(|(_, id)| !tree.nodes[*id].is_leaf())
        .map(|(pre, id)| (depth[id], pre, id))
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let input_of = |child: NodeId| match tree.nodes[child].kind {
        NodeKind::Constant(e) => StepInput::Entity(e),
        NodeKind::Variable => StepInput::Var(tree.nodes[child].name.clone()),
    };
    let steps: Vec<SubqueryStep> = order
        .into_iter()
        .map(|(_, _, id)| {
            let node = &tree.nodes[id];
            match node.inputs.as_slice() {
                [TreeEdge {
                    child,
                    label: EdgeLabel::Relation { relation, inverse },
                }] => SubqueryStep {
                    kind: StepKind::Projection,
                    inputs: vec![input_of(*child)],
                    relation: Some((*relation, *inverse)),
                    output: node.name.clone(),
                },
                [a, b] => {
                    let negated = |e: &TreeEdge| matches!(e.label, EdgeLabel::Join { negated: true, .. });
                    let (kind, first, second) = match node.join_kind() {
                        Some(JoinKind::Union) => (StepKind::Union, a, b),
                        _ if negated(a) => (StepKind::NegatedIntersection, b, a),
                        _ if negated(b) => (StepKind::NegatedIntersection, a, b),
                        _ => (StepKind::Intersection, a, b),
                    };
                    SubqueryStep {
                        kind,
                        inputs: vec![input_of(first.child), input_of(second.child)],
                        relation: None,
                        output: node.name.clone(),
                    }
                }
                other => unreachable!("binary tree node with {} inputs", other.len()),
            }
        })
        .collect();
    DecompositionChain {
        subquery_count: steps.len(),
        steps,
        source_type: QueryType::General,
    }
}

/// Full pipeline from expression to subquery chain.
pub fn compile(expr: &QueryExpr) -> Result<DecompositionChain> {
    let tree = to_computation_tree(expr)?;
    let merged = duplicate_union_branches(&tree);
    let mut chain = reverse_level_traversal(&binarize(&merged));
    chain.source_type = classify(expr);
    Ok(chain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DifficultyClass {
    Easy = 1,
    Medium = 2,
    Hard = 3,
}

impl DifficultyClass {
    pub const ALL: [DifficultyClass; 3] = [
        DifficultyClass::Easy,
        DifficultyClass::Medium,
        DifficultyClass::Hard,
    ];

    pub fn from_count(subquery_count: usize) -> Self {
        match subquery_count {
            0..=2 => DifficultyClass::Easy,
            3 => DifficultyClass::Medium,
            _ => DifficultyClass::Hard,
        }
    }

    pub fn level(self) -> u8 {
        self as u8
    }

    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            1 => Some(DifficultyClass::Easy),
            2 => Some(DifficultyClass::Medium),
            3 => Some(DifficultyClass::Hard),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }
}

impl fmt::Display for DifficultyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DifficultyClass::Easy => "easy",
            DifficultyClass::Medium => "medium",
            DifficultyClass::Hard => "hard",
        })
    }
}

pub fn difficulty(chain: &DecompositionChain) -> (usize, DifficultyClass) {
    (
        chain.subquery_count,
        DifficultyClass::from_count(chain.subquery_count),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse;

    fn chain(s: &str) -> DecompositionChain {
        compile(&parse(s).unwrap()).unwrap()
    }

    #[test]
    fn one_hop_tree() {
        let t = to_computation_tree(&parse("(p 3 (e 7))").unwrap()).unwrap();
        assert_eq!(t.nodes().len(), 2);
        let root = t.node(t.root());
        assert_eq!(root.name, "v?");
        assert_eq!(
            root.inputs,
            vec![TreeEdge {
                child: 1,
                label: EdgeLabel::Relation {
                    relation: 3,
                    inverse: false
                }
            }]
        );
        assert_eq!(t.node(1).kind, NodeKind::Constant(7));
    }

    #[test]
    fn two_hop_chain_names() {
        let t = to_computation_tree(&parse("(p 2 (p 1 (e 5)))").unwrap()).unwrap();
        let names: Vec<&str> = t.preorder().iter().map(|&n| t.node(n).name.as_str()).collect();
        assert_eq!(names, ["v?", "v1", "e5"]);
    }

    #[test]
    fn tree_round_trips_expression() {
        for s in [
            "(and (p 1 (e 2)) (not (pi 4 (e 5))) (p 6 (p 7 (e 8))))",
            "(p 9 (or (p 1 (e 1)) (p 2 (e 2))))",
        ] {
            let e = parse(s).unwrap();
            assert_eq!(to_computation_tree(&e).unwrap().to_expr(), e);
        }
    }

    #[test]
    fn constant_root_is_rejected() {
        assert!(to_computation_tree(&parse("(e 1)").unwrap()).is_err());
    }

    #[test]
    fn distributive_merge() {
        let e = parse("(or (and (p 1 (e 1)) (p 2 (e 2))) (and (p 1 (e 1)) (p 3 (e 3))))").unwrap();
        let t = duplicate_union_branches(&to_computation_tree(&e).unwrap());
        assert_eq!(
            t.to_expr(),
            parse("(and (p 1 (e 1)) (or (p 2 (e 2)) (p 3 (e 3))))").unwrap()
        );
    }

    #[test]
    fn converged_projection_edge() {
        let e = parse("(or (p 5 (p 1 (e 1))) (p 5 (p 2 (e 2))))").unwrap();
        let merged = merge_unions(&e);
        assert_eq!(merged, parse("(p 5 (or (p 1 (e 1)) (p 2 (e 2))))").unwrap());
        assert_eq!(classify(&merged), QueryType::Up);
    }

    #[test]
    fn union_free_is_fixpoint() {
        let e = parse("(and (p 1 (e 1)) (not (p 2 (e 2))))").unwrap();
        let t = to_computation_tree(&e).unwrap();
        assert_eq!(duplicate_union_branches(&t), t);
    }

    #[test]
    fn absorption_is_not_applied() {
        // (A∧B) ∨ (A∧¬C): the second remainder has no positive operand.
        let e = parse("(or (and (e 1) (e 2)) (and (e 1) (not (e 3))))").unwrap();
        assert_eq!(merge_unions(&e), e);
    }

    #[test]
    fn left_associative_split() {
        let e = parse("(and (e 1) (e 2) (e 3))").unwrap();
        let b = binarize(&to_computation_tree(&e).unwrap());
        assert_eq!(b.tree().max_join_arity(), 2);
        let root = b.tree().node(b.tree().root());
        let left = b.tree().node(root.inputs[0].child);
        assert_eq!(left.name, "v1'");
        assert_eq!(left.inputs.len(), 2);
        assert_eq!(b.tree().node(left.inputs[0].child).kind, NodeKind::Constant(1));
        assert_eq!(b.tree().node(left.inputs[1].child).kind, NodeKind::Constant(2));
        assert_eq!(b.tree().node(root.inputs[1].child).kind, NodeKind::Constant(3));
        assert_eq!(
            b.tree().to_expr(),
            parse("(and (and (e 1) (e 2)) (e 3))").unwrap()
        );
    }

    #[test]
    fn negated_inputs_fold_last() {
        let e = parse("(and (not (e 1)) (e 2) (e 3))").unwrap();
        let b = binarize(&to_computation_tree(&e).unwrap());
        assert_eq!(
            b.tree().to_expr(),
            parse("(and (and (e 2) (e 3)) (not (e 1)))").unwrap()
        );
    }

    #[test]
    fn binary_tree_is_fixpoint() {
        let e = parse("(and (p 1 (e 1)) (p 2 (e 2)))").unwrap();
        let t = to_computation_tree(&e).unwrap();
        assert_eq!(binarize(&t).tree(), &t);
    }

    #[test]
    fn three_way_intersection_has_two_joins() {
        let e = parse("(and (p 1 (e 1)) (p 2 (e 2)) (p 3 (e 3)))").unwrap();
        let b = binarize(&to_computation_tree(&e).unwrap());
        assert_eq!(b.tree().count_joins(), 2);
        assert_eq!(b.tree().count_projections(), 3);
    }

    #[test]
    fn single_projection_chain() {
        let c = chain("(p 3 (e 7))");
        assert_eq!(c.steps.len(), 1);
        assert_eq!(c.lines().next().unwrap(), "STEP 1: projection e7 rel=3 -> v?");
        assert_eq!(difficulty(&c), (1, DifficultyClass::Easy));
    }

    #[test]
    fn chain_lines_are_pinned() {
        let c = chain("(and (p 1 (e 2)) (not (pi 4 (e 5))))");
        let lines: Vec<String> = c.lines().collect();
        assert_eq!(
            lines,
            [
                "STEP 1: projection e2 rel=1 -> v1",
                "STEP 2: projection e5 rel=4^-1 -> v2",
                "STEP 3: negated-intersection v1,v2 -> v?",
            ]
        );
        assert_eq!(c.source_type, QueryType::In2);
    }

    #[test]
    fn pni_puts_positive_input_first() {
        let c = chain("(and (not (p 2 (p 1 (e 1)))) (p 3 (e 2)))");
        let last = c.steps.last().unwrap();
        assert_eq!(last.kind, StepKind::NegatedIntersection);
        assert_eq!(
            last.inputs,
            vec![StepInput::Var("v3".into()), StepInput::Var("v1".into())]
        );
    }

    #[test]
    fn worked_example_shape() {
        // v? = r(v3') ∧ r(v5'); v3' = r(r(a)) ∧ r(r(b)); v5' = ¬r(r(d)) ∧ r(c)
        let c = chain(
            "(and (p 9 (and (p 1 (p 1 (e 1))) (p 2 (p 2 (e 2))))) \
                  (p 9 (and (not (p 4 (p 4 (e 4)))) (p 3 (e 3)))))",
        );
        let kinds: Vec<StepKind> = c.steps.iter().map(|s| s.kind).collect();
        use StepKind::*;
        assert_eq!(
            kinds,
            [
                Projection,
                Projection,
                Projection,
                Projection,
                Projection,
                Projection,
                Projection,
                Intersection,
                NegatedIntersection,
                Projection,
                Projection,
                Intersection,
            ]
        );
        assert_eq!(c.steps.last().unwrap().output, "v?");
    }

    #[test]
    fn inputs_are_emitted_before_use() {
        let c = chain("(and (p 2 (p 1 (e 1))) (p 3 (e 2)) (not (p 4 (e 3))))");
        let mut seen = std::collections::HashSet::new();
        for s in &c.steps {
            for i in &s.inputs {
                if let StepInput::Var(v) = i {
                    assert!(seen.contains(v), "{v} used before definition");
                }
            }
            assert!(seen.insert(s.output.clone()));
        }
    }

    #[test]
    fn difficulty_thresholds() {
        assert_eq!(DifficultyClass::from_count(1), DifficultyClass::Easy);
        assert_eq!(DifficultyClass::from_count(2), DifficultyClass::Easy);
        assert_eq!(DifficultyClass::from_count(3), DifficultyClass::Medium);
        assert_eq!(DifficultyClass::from_count(4), DifficultyClass::Hard);
        assert_eq!(DifficultyClass::from_count(9), DifficultyClass::Hard);
    }

    #[test]
    fn compile_is_deterministic() {
        let s = "(and (p 1 (e 1)) (p 2 (e 2)) (not (p 3 (e 3))))";
        assert_eq!(chain(s), chain(s));
    }
}
