use std::fmt;

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId};

/// An EFO₁ query with a single implicit free variable: the output set of the
/// root node.
///
/// Negation only exists as a flag on a conjunct of [`QueryExpr::And`], so every
/// conjunction keeps at least one positive operand.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryExpr {
    Entity(EntityId),
    Proj {
        relation: RelationId,
        inverse: bool,
        child: Box<QueryExpr>,
    },
    And(Vec<Conjunct>),
    Or(Vec<QueryExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Conjunct {
    pub expr: QueryExpr,
    pub negated: bool,
}

impl Conjunct {
    pub fn pos(expr: QueryExpr) -> Self {
        Conjunct {
            expr,
            negated: false,
        }
    }

    pub fn neg(expr: QueryExpr) -> Self {
        Conjunct {
            expr,
            negated: true,
        }
    }
}

impl QueryExpr {
    pub fn entity(id: EntityId) -> Self {
        QueryExpr::Entity(id)
    }

    pub fn proj(relation: RelationId, child: QueryExpr) -> Self {
        QueryExpr::Proj {
            relation,
            inverse: false,
            child: Box::new(child),
        }
    }

    pub fn inv_proj(relation: RelationId, child: QueryExpr) -> Self {
        QueryExpr::Proj {
            relation,
            inverse: true,
            child: Box::new(child),
        }
    }

    /// Conjunction of positive operands.
    pub fn and(children: impl IntoIterator<Item = QueryExpr>) -> Self {
        QueryExpr::And(children.into_iter().map(Conjunct::pos).collect())
    }

    pub fn and_with(conjuncts: impl IntoIterator<Item = Conjunct>) -> Self {
        QueryExpr::And(conjuncts.into_iter().collect())
    }

    pub fn or(children: impl IntoIterator<Item = QueryExpr>) -> Self {
        QueryExpr::Or(children.into_iter().collect())
    }

    /// Checks the structural invariants: joins have at least two operands and
    /// every conjunction has a positive operand.
    pub fn validate(&self) -> Result<()> {
        match self {
            QueryExpr::Entity(_) => Ok(()),
            QueryExpr::Proj { child, .. } => child.validate(),
            QueryExpr::And(conjuncts) => {
                if conjuncts.len() < 2 {
                    return Err(Error::Structure("`and` needs at least two operands".into()));
                }
                if conjuncts.iter().all(|c| c.negated) {
                    return Err(Error::Structure(
                        "`and` has no positive operand".into(),
                    ));
                }
                conjuncts.iter().try_for_each(|c| c.expr.validate())
            }
            QueryExpr::Or(children) => {
                if children.len() < 2 {
                    return Err(Error::Structure("`or` needs at least two operands".into()));
                }
                children.iter().try_for_each(QueryExpr::validate)
            }
        }
    }

    /// Constant entities in left-to-right order.
    pub fn anchors(&self) -> Vec<EntityId> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let QueryExpr::Entity(id) = e {
                out.push(*id);
            }
        });
        out
    }

    /// Relations in left-to-right (pre-order) order.
    pub fn relations(&self) -> Vec<RelationId> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let QueryExpr::Proj { relation, .. } = e {
                out.push(*relation);
            }
        });
        out
    }

    pub fn has_negation(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let QueryExpr::And(cs) = e {
                found |= cs.iter().any(|c| c.negated);
            }
        });
        found
    }

    pub fn has_union(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, QueryExpr::Or(_)));
        found
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a QueryExpr)) {
        f(self);
        match self {
            QueryExpr::Entity(_) => {}
            QueryExpr::Proj { child, .. } => child.visit(f),
            QueryExpr::And(cs) => cs.iter().for_each(|c| c.expr.visit(f)),
            QueryExpr::Or(children) => children.iter().for_each(|c| c.visit(f)),
        }
    }

    /// Number of nodes in the expression.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::Entity(id) => write!(f, "(e {id})"),
            QueryExpr::Proj {
                relation,
                inverse,
                child,
            } => {
                let head = if *inverse { "pi" } else { "p" };
                write!(f, "({head} {relation} {child})")
            }
            QueryExpr::And(cs) => {
                f.write_str("(and")?;
                for c in cs {
                    if c.negated {
                        write!(f, " (not {})", c.expr)?;
                    } else {
                        write!(f, " {}", c.expr)?;
                    }
                }
                f.write_str(")")
            }
            QueryExpr::Or(children) => {
                f.write_str("(or")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}
