//! Connective normal forms.
//!
//! Projections do not distribute over intersection, so both forms only
//! normalize the boolean structure between projections:
//!
//! * DNF: no `or` below any `and` or projection; unions are lifted to the
//!   root.
//! * CNF: no `and` directly below an `or`.
//!
//! Negated conjuncts are handled with the set identities
//! `A ∖ (B ∪ C) = (A ∖ B) ∖ C` and `(A ∖ B) ∪ C = (A ∪ C) ∖ (B ∖ C)`.

use crate::query::expr::{Conjunct, QueryExpr};

pub fn to_dnf(expr: &QueryExpr) -> QueryExpr {
    let mut disjuncts = dnf(expr);
    if disjuncts.len() == 1 {
        disjuncts.pop().expect("one disjunct")
    } else {
        QueryExpr::Or(disjuncts)
    }
}

/// Union-free disjuncts whose union equals `expr`.
fn dnf(expr: &QueryExpr) -> Vec<QueryExpr> {
    match expr {
        QueryExpr::Entity(_) => vec![expr.clone()],
        QueryExpr::Proj {
            relation,
            inverse,
            child,
        } => dnf(child)
            .into_iter()
            .map(|d| QueryExpr::Proj {
                relation: *relation,
                inverse: *inverse,
                child: Box::new(d),
            })
            .collect(),
        QueryExpr::Or(children) => children.iter().flat_map(dnf).collect(),
        QueryExpr::And(cs) => {
            // Cartesian product over positive operands, preserving order.
            let mut combos: Vec<Vec<Conjunct>> = vec![Vec::new()];
            let mut negatives: Vec<(usize, Vec<QueryExpr>)> = Vec::new();
            for (i, c) in cs.iter().enumerate() {
                let parts = dnf(&c.expr);
                if c.negated {
                    negatives.push((i, parts));
                    continue;
                }
                combos = combos
                    .into_iter()
                    .flat_map(|prefix| {
                        parts.iter().map(move |p| {
                            let mut next = prefix.clone();
                            next.push(Conjunct::pos(p.clone()));
                            next
                        })
                    })
                    .collect();
            }
            combos
                .into_iter()
                .map(|positives| {
                    // Re-interleave negated operands at their original slots.
                    let mut out = Vec::with_capacity(positives.len() + negatives.len());
                    let mut pos_iter = positives.into_iter();
                    let mut neg_iter = negatives.iter().peekable();
                    for i in 0..cs.len() {
                        match neg_iter.peek() {
                            Some((j, parts)) if *j == i => {
                                out.extend(parts.iter().cloned().map(Conjunct::neg));
                                neg_iter.next();
                            }
                            _ => out.push(pos_iter.next().expect("positive operand")),
                        }
                    }
                    QueryExpr::And(out)
                })
                .collect()
        }
    }
}

pub fn to_cnf(expr: &QueryExpr) -> QueryExpr {
    match expr {
        QueryExpr::Entity(_) => expr.clone(),
        QueryExpr::Proj {
            relation,
            inverse,
            child,
        } => QueryExpr::Proj {
            relation: *relation,
            inverse: *inverse,
            child: Box::new(to_cnf(child)),
        },
        QueryExpr::And(cs) => QueryExpr::And(
            cs.iter()
                .map(|c| Conjunct {
                    expr: to_cnf(&c.expr),
                    negated: c.negated,
                })
                .collect(),
        ),
        QueryExpr::Or(children) => {
            let children: Vec<QueryExpr> = children.iter().map(to_cnf).collect();
            let Some(k) = children
                .iter()
                .position(|c| matches!(c, QueryExpr::And(_)))
            else {
                return QueryExpr::Or(children);
            };
            let QueryExpr::And(cs) = &children[k] else {
                unreachable!()
            };
            let rest: Vec<QueryExpr> = children
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, c)| c.clone())
                .collect();
            let rest = if rest.len() == 1 {
                rest.into_iter().next().expect("one operand")
            } else {
                QueryExpr::Or(rest)
            };
            let conjuncts = cs
                .iter()
                .map(|c| {
                    if c.negated {
                        // ¬B ∨ R  ≡  ¬(B ∧ ¬R)
                        Conjunct::neg(to_cnf(&QueryExpr::and_with([
                            Conjunct::pos(c.expr.clone()),
                            Conjunct::neg(rest.clone()),
                        ])))
                    } else {
                        let mut operands = children.clone();
                        operands[k] = c.expr.clone();
                        Conjunct::pos(to_cnf(&QueryExpr::Or(operands)))
                    }
                })
                .collect();
            QueryExpr::And(conjuncts)
        }
    }
}

/// True when no union sits below a conjunction or projection.
pub fn is_dnf(expr: &QueryExpr) -> bool {
    fn union_free(e: &QueryExpr) -> bool {
        !e.has_union()
    }
    match expr {
        QueryExpr::Or(children) => children.iter().all(union_free),
        other => union_free(other),
    }
}

/// True when no conjunction sits directly below a union.
pub fn is_cnf(expr: &QueryExpr) -> bool {
    let mut ok = true;
    expr.visit(&mut |e| {
        if let QueryExpr::Or(children) = e {
            ok &= !children.iter().any(|c| matches!(c, QueryExpr::And(_)));
        }
    });
    ok
}
