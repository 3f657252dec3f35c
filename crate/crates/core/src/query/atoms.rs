//! Flat atom-list form of a query and its conversion to an expression tree.
//!
//! An atom `r(subject, object)` states that the triple `(subject, r, object)`
//! holds. Variables are named; the free variable is always `v?`. The list's
//! connective decides how several atoms that bind the same variable are
//! joined: intersection for [`Connective::Cnf`], union for
//! [`Connective::Dnf`].

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId};
use crate::query::expr::{Conjunct, QueryExpr};

pub const FREE_VAR: &str = "v?";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(EntityId),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub relation: RelationId,
    pub negated: bool,
    pub subject: Term,
    pub object: Term,
}

impl Atom {
    pub fn new(relation: RelationId, subject: Term, object: Term) -> Self {
        Atom {
            relation,
            negated: false,
            subject,
            object,
        }
    }

    pub fn negated(relation: RelationId, subject: Term, object: Term) -> Self {
        Atom {
            relation,
            negated: true,
            subject,
            object,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connective {
    Cnf,
    Dnf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomList {
    pub atoms: Vec<Atom>,
    pub connective: Connective,
}

impl AtomList {
    /// Sorted `(relation, negated)` labels, for multiset comparison.
    pub fn labels(&self) -> Vec<(RelationId, bool)> {
        let mut v: Vec<_> = self.atoms.iter().map(|a| (a.relation, a.negated)).collect();
        v.sort_unstable();
        v
    }
}

/// Node of the undirected atom graph. Every constant occurrence gets its own
/// node; variables are shared by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Var(String),
    Const { atom: usize, id: EntityId },
}

/// Converts an atom list into an expression rooted at `v?`, orienting every
/// edge from child to parent. An atom whose subject is the parent becomes an
/// inverse projection.
pub fn from_atom_list(list: &AtomList) -> Result<QueryExpr> {
    if list.atoms.is_empty() {
        return Err(Error::AtomList("no atoms".into()));
    }
    let mut nodes: BTreeMap<Node, usize> = BTreeMap::new();
    let node_of = |term: &Term, atom: usize, nodes: &mut BTreeMap<Node, usize>| {
        let key = match term {
            Term::Var(name) => Node::Var(name.clone()),
            Term::Const(id) => Node::Const { atom, id: *id },
        };
        let next = nodes.len();
        *nodes.entry(key).or_insert(next)
    };
    // (subject node, object node) per atom
    let mut ends = Vec::with_capacity(list.atoms.len());
    for (i, atom) in list.atoms.iter().enumerate() {
        let s = node_of(&atom.subject, i, &mut nodes);
        let o = node_of(&atom.object, i, &mut nodes);
        ends.push((s, o));
    }
    let root = *nodes
        .get(&Node::Var(FREE_VAR.to_string()))
        .ok_or_else(|| Error::AtomList(format!("free variable `{FREE_VAR}` does not occur")))?;

    let n = nodes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &(s, o)) in ends.iter().enumerate() {
        adj[s].push(i);
        if o != s {
            adj[o].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(x) = queue.pop_front() {
        for &a in &adj[x] {
            let (s, o) = ends[a];
            for y in [s, o] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::AtomList("atoms are disconnected from `v?`".into()));
    }
    if list.atoms.len() != n - 1 {
        return Err(Error::AtomList(
            "atom graph must be tree-shaped but contains a cycle".into(),
        ));
    }

    let names: BTreeMap<usize, &Node> = nodes.iter().map(|(k, v)| (*v, k)).collect();
    build(list, &ends, &adj, &names, root, None)
}

fn build(
    list: &AtomList,
    ends: &[(usize, usize)],
    adj: &[Vec<usize>],
    names: &BTreeMap<usize, &Node>,
    node: usize,
    parent_atom: Option<usize>,
) -> Result<QueryExpr> {
    if let Node::Const { id, .. } = names[&node] {
        return Ok(QueryExpr::Entity(*id));
    }
    let var_name = match names[&node] {
        Node::Var(name) => name.as_str(),
        Node::Const { .. } => unreachable!(),
    };
    let mut branches = Vec::new();
    for &a in adj[node].iter().filter(|&&a| Some(a) != parent_atom) {
        let atom = &list.atoms[a];
        let (s, o) = ends[a];
        // child -> parent: forward when the child is the subject
        let (child, inverse) = if o == node { (s, false) } else { (o, true) };
        let sub = build(list, ends, adj, names, child, Some(a))?;
        let proj = QueryExpr::Proj {
            relation: atom.relation,
            inverse,
            child: Box::new(sub),
        };
        branches.push(Conjunct {
            expr: proj,
            negated: atom.negated,
        });
    }
    match branches.len() {
        0 => Err(Error::AtomList(format!(
            "variable `{var_name}` is not constrained by any atom below it"
        ))),
        1 => {
            let b = branches.pop().expect("one branch");
            if b.negated {
                Err(Error::AtomList(format!(
                    "variable `{var_name}` is only constrained negatively"
                )))
            } else {
                Ok(b.expr)
            }
        }
        _ => match list.connective {
            Connective::Cnf => {
                if branches.iter().all(|b| b.negated) {
                    return Err(Error::AtomList(format!(
                        "variable `{var_name}` is only constrained negatively"
                    )));
                }
                Ok(QueryExpr::And(branches))
            }
            Connective::Dnf => {
                if branches.iter().any(|b| b.negated) {
                    return Err(Error::AtomList(
                        "negated atoms cannot be joined by disjunction".into(),
                    ));
                }
                Ok(QueryExpr::Or(branches.into_iter().map(|b| b.expr).collect()))
            }
        },
    }
}

/// Flattens an expression back into atoms. Fails for expressions that mix
/// conjunction and disjunction, negate anything but a projection, or join a
/// bare constant.
pub fn to_atom_list(expr: &QueryExpr) -> Result<AtomList> {
    let has_and = {
        let mut found = false;
        expr.visit(&mut |e| found |= matches!(e, QueryExpr::And(_)));
        found
    };
    let connective = match (has_and, expr.has_union()) {
        (true, true) => {
            return Err(Error::AtomList(
                "expression mixes conjunction and disjunction".into(),
            ))
        }
        (_, true) => Connective::Dnf,
        _ => Connective::Cnf,
    };
    let mut atoms = Vec::new();
    let mut counter = 0;
    flatten(expr, &Term::var(FREE_VAR), false, &mut atoms, &mut counter)?;
    Ok(AtomList { atoms, connective })
}

fn flatten(
    expr: &QueryExpr,
    target: &Term,
    negated: bool,
    atoms: &mut Vec<Atom>,
    counter: &mut usize,
) -> Result<()> {
    match expr {
        QueryExpr::Entity(_) => Err(Error::AtomList(
            "a constant can only appear under a projection".into(),
        )),
        QueryExpr::Proj {
            relation,
            inverse,
            child,
        } => {
            let child_term = match **child {
                QueryExpr::Entity(id) => Term::Const(id),
                _ => {
                    *counter += 1;
                    Term::Var(format!("v{counter}"))
                }
            };
            let (subject, object) = if *inverse {
                (target.clone(), child_term.clone())
            } else {
                (child_term.clone(), target.clone())
            };
            atoms.push(Atom {
                relation: *relation,
                negated,
                subject,
                object,
            });
            if matches!(child_term, Term::Var(_)) {
                flatten(child, &child_term, false, atoms, counter)?;
            }
            Ok(())
        }
        QueryExpr::And(cs) => {
            if negated {
                return Err(Error::AtomList("only projections can be negated".into()));
            }
            for c in cs {
                if c.negated && !matches!(c.expr, QueryExpr::Proj { .. }) {
                    return Err(Error::AtomList("only projections can be negated".into()));
                }
                flatten(&c.expr, target, c.negated, atoms, counter)?;
            }
            Ok(())
        }
        QueryExpr::Or(children) => {
            for c in children {
                flatten(c, target, false, atoms, counter)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{classify, QueryType};

    fn c(id: EntityId) -> Term {
        Term::Const(id)
    }

    #[test]
    fn two_atom_chain() {
        let list = AtomList {
            atoms: vec![
                Atom::new(1, c(1), Term::var("v1")),
                Atom::new(2, Term::var("v1"), Term::var(FREE_VAR)),
            ],
            connective: Connective::Cnf,
        };
        let e = from_atom_list(&list).unwrap();
        assert_eq!(e, QueryExpr::proj(2, QueryExpr::proj(1, QueryExpr::entity(1))));
        assert_eq!(classify(&e), QueryType::P2);
    }

    #[test]
    fn negated_atom_becomes_negated_conjunct() {
        let list = AtomList {
            atoms: vec![
                Atom::new(1, c(1), Term::var(FREE_VAR)),
                Atom::negated(2, c(2), Term::var(FREE_VAR)),
            ],
            connective: Connective::Cnf,
        };
        let e = from_atom_list(&list).unwrap();
        assert_eq!(
            e,
            QueryExpr::and_with([
                Conjunct::pos(QueryExpr::proj(1, QueryExpr::entity(1))),
                Conjunct::neg(QueryExpr::proj(2, QueryExpr::entity(2))),
            ])
        );
        assert_eq!(classify(&e), QueryType::In2);
    }

    #[test]
    fn free_variable_as_subject_is_inverse() {
        let list = AtomList {
            atoms: vec![Atom::new(3, Term::var(FREE_VAR), c(8))],
            connective: Connective::Cnf,
        };
        assert_eq!(
            from_atom_list(&list).unwrap(),
            QueryExpr::inv_proj(3, QueryExpr::entity(8))
        );
    }

    #[test]
    fn dnf_joins_with_union() {
        let list = AtomList {
            atoms: vec![
                Atom::new(1, c(1), Term::var("v1")),
                Atom::new(2, c(2), Term::var("v1")),
                Atom::new(3, Term::var("v1"), Term::var(FREE_VAR)),
            ],
            connective: Connective::Dnf,
        };
        let e = from_atom_list(&list).unwrap();
        assert_eq!(classify(&e), QueryType::Up);
    }

    #[test]
    fn cycles_are_rejected() {
        let list = AtomList {
            atoms: vec![
                Atom::new(1, c(1), Term::var("v1")),
                Atom::new(2, Term::var("v1"), Term::var(FREE_VAR)),
                Atom::new(3, Term::var("v1"), Term::var(FREE_VAR)),
            ],
            connective: Connective::Cnf,
        };
        let err = from_atom_list(&list).unwrap_err();
        assert!(err.to_string().contains("tree-shaped"), "{err}");
    }

    #[test]
    fn disconnected_atoms_are_rejected() {
        let list = AtomList {
            atoms: vec![
                Atom::new(1, c(1), Term::var(FREE_VAR)),
                Atom::new(2, c(2), Term::var("v7")),
            ],
            connective: Connective::Cnf,
        };
        let err = from_atom_list(&list).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
    }

    #[test]
    fn missing_free_variable() {
        let list = AtomList {
            atoms: vec![Atom::new(1, c(1), Term::var("v1"))],
            connective: Connective::Cnf,
        };
        assert!(from_atom_list(&list).is_err());
    }

    #[test]
    fn dangling_variable_and_lone_negation() {
        let dangling = AtomList {
            atoms: vec![Atom::new(1, Term::var("v1"), Term::var(FREE_VAR))],
            connective: Connective::Cnf,
        };
        assert!(from_atom_list(&dangling).is_err());
        let lone = AtomList {
            atoms: vec![Atom::negated(1, c(1), Term::var(FREE_VAR))],
            connective: Connective::Cnf,
        };
        assert!(from_atom_list(&lone).is_err());
    }

    #[test]
    fn templates_survive_flattening() {
        for t in QueryType::ALL {
            let mut next = 0;
            let mut e = t.template().unwrap();
            relabel(&mut e, &mut next);
            let atoms = to_atom_list(&e).unwrap();
            let back = from_atom_list(&atoms).unwrap();
            assert_eq!(classify(&back), t, "{t}");
            assert_eq!(to_atom_list(&back).unwrap().labels(), atoms.labels(), "{t}");
        }
    }

    fn relabel(e: &mut QueryExpr, next: &mut u32) {
        match e {
            QueryExpr::Entity(id) => {
                *id = *next;
                *next += 1;
            }
            QueryExpr::Proj { relation, child, .. } => {
                *relation = *next;
                *next += 1;
                relabel(child, next);
            }
            QueryExpr::And(cs) => cs.iter_mut().for_each(|c| relabel(&mut c.expr, next)),
            QueryExpr::Or(cs) => cs.iter_mut().for_each(|c| relabel(c, next)),
        }
    }
}
