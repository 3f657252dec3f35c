use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::query::expr::{Conjunct, QueryExpr};

/// Structural class of a query. The fourteen named types are the standard
/// complex-query benchmark shapes; anything else is [`QueryType::General`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryType {
    #[serde(rename = "1p")]
    P1,
    #[serde(rename = "2p")]
    P2,
    #[serde(rename = "3p")]
    P3,
    #[serde(rename = "2i")]
    I2,
    #[serde(rename = "3i")]
    I3,
    #[serde(rename = "pi")]
    Pi,
    #[serde(rename = "ip")]
    Ip,
    #[serde(rename = "2u")]
    U2,
    #[serde(rename = "up")]
    Up,
    #[serde(rename = "2in")]
    In2,
    #[serde(rename = "3in")]
    In3,
    #[serde(rename = "inp")]
    Inp,
    #[serde(rename = "pin")]
    Pin,
    #[serde(rename = "pni")]
    Pni,
    #[serde(rename = "general")]
    General,
}

impl QueryType {
    /// The fourteen benchmark types in table order.
    pub const ALL: [QueryType; 14] = [
        QueryType::P1,
        QueryType::P2,
        QueryType::P3,
        QueryType::I2,
        QueryType::I3,
        QueryType::Pi,
        QueryType::Ip,
        QueryType::U2,
        QueryType::Up,
        QueryType::In2,
        QueryType::In3,
        QueryType::Inp,
        QueryType::Pin,
        QueryType::Pni,
    ];

    /// Negation-free types (the `avg_p` group).
    pub const POSITIVE: [QueryType; 9] = [
        QueryType::P1,
        QueryType::P2,
        QueryType::P3,
        QueryType::I2,
        QueryType::I3,
        QueryType::Pi,
        QueryType::Ip,
        QueryType::U2,
        QueryType::Up,
    ];

    /// Types outside the usual embedding-model training distribution.
    pub const OOD: [QueryType; 4] = [QueryType::Pi, QueryType::Ip, QueryType::U2, QueryType::Up];

    pub const NEGATION: [QueryType; 5] = [
        QueryType::In2,
        QueryType::In3,
        QueryType::Inp,
        QueryType::Pin,
        QueryType::Pni,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            QueryType::P1 => "1p",
            QueryType::P2 => "2p",
            QueryType::P3 => "3p",
            QueryType::I2 => "2i",
            QueryType::I3 => "3i",
            QueryType::Pi => "pi",
            QueryType::Ip => "ip",
            QueryType::U2 => "2u",
            QueryType::Up => "up",
            QueryType::In2 => "2in",
            QueryType::In3 => "3in",
            QueryType::Inp => "inp",
            QueryType::Pin => "pin",
            QueryType::Pni => "pni",
            QueryType::General => "general",
        }
    }

    /// Template expression with every entity and relation set to 0.
    pub fn template(self) -> Option<QueryExpr> {
        let e = || QueryExpr::entity(0);
        let p = |c: QueryExpr| QueryExpr::proj(0, c);
        let pos = Conjunct::pos;
        let neg = Conjunct::neg;
        let t = match self {
            QueryType::P1 => p(e()),
            QueryType::P2 => p(p(e())),
            QueryType::P3 => p(p(p(e()))),
            QueryType::I2 => QueryExpr::and([p(e()), p(e())]),
            QueryType::I3 => QueryExpr::and([p(e()), p(e()), p(e())]),
            QueryType::Pi => QueryExpr::and([p(p(e())), p(e())]),
            QueryType::Ip => p(QueryExpr::and([p(e()), p(e())])),
            QueryType::U2 => QueryExpr::or([p(e()), p(e())]),
            QueryType::Up => p(QueryExpr::or([p(e()), p(e())])),
            QueryType::In2 => QueryExpr::and_with([pos(p(e())), neg(p(e()))]),
            QueryType::In3 => QueryExpr::and_with([pos(p(e())), pos(p(e())), neg(p(e()))]),
            QueryType::Inp => p(QueryExpr::and_with([pos(p(e())), neg(p(e()))])),
            QueryType::Pin => QueryExpr::and_with([pos(p(p(e()))), neg(p(e()))]),
            QueryType::Pni => QueryExpr::and_with([neg(p(p(e()))), pos(p(e()))]),
            QueryType::General => return None,
        };
        Some(t)
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for QueryType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryType::ALL
            .iter()
            .copied()
            .chain([QueryType::General])
            .find(|t| t.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown query type `{s}`")))
    }
}

/// Canonical shape string: ids and projection direction erased, join
/// operands sorted so that the result is invariant under permutation.
pub fn shape(expr: &QueryExpr) -> String {
    match expr {
        QueryExpr::Entity(_) => "e".into(),
        QueryExpr::Proj { child, .. } => format!("p({})", shape(child)),
        QueryExpr::And(cs) => {
            let mut parts: Vec<String> = cs
                .iter()
                .map(|c| {
                    let s = shape(&c.expr);
                    if c.negated {
                        format!("!{s}")
                    } else {
                        s
                    }
                })
                .collect();
            parts.sort();
            format!("and({})", parts.join(","))
        }
        QueryExpr::Or(children) => {
            let mut parts: Vec<String> = children.iter().map(shape).collect();
            parts.sort();
            format!("or({})", parts.join(","))
        }
    }
}

fn template_shapes() -> &'static HashMap<String, QueryType> {
    static SHAPES: OnceLock<HashMap<String, QueryType>> = OnceLock::new();
    SHAPES.get_or_init(|| {
        QueryType::ALL
            .iter()
            .map(|&t| (shape(&t.template().expect("named type")), t))
            .collect()
    })
}

pub fn classify(expr: &QueryExpr) -> QueryType {
    template_shapes()
        .get(&shape(expr))
        .copied()
        .unwrap_or(QueryType::General)
}
