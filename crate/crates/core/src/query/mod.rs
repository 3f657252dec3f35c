//! EFO₁ query representation: expression trees, the s-expression syntax,
//! the fourteen benchmark templates, normal forms and sampling.

mod atoms;
mod expr;
mod normal;
mod parse;
mod sample;
mod template;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub use atoms::{from_atom_list, to_atom_list, Atom, AtomList, Connective, Term, FREE_VAR};
pub use expr::{Conjunct, QueryExpr};
pub use normal::{is_cnf, is_dnf, to_cnf, to_dnf};
pub use parse::parse;
pub use sample::{sample_queries, sample_queries_where, SampleOptions, DEFAULT_MAX_RETRIES};
pub use template::{classify, shape, QueryType};

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId};

/// A query with concrete anchors and relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundedQuery {
    pub id: String,
    pub expr: QueryExpr,
    pub query_type: QueryType,
    pub anchors: Vec<EntityId>,
    pub relations: Vec<RelationId>,
}

impl GroundedQuery {
    pub fn new(id: impl Into<String>, expr: QueryExpr) -> Self {
        GroundedQuery {
            id: id.into(),
            query_type: classify(&expr),
            anchors: expr.anchors(),
            relations: expr.relations(),
            expr,
        }
    }

    /// `<id>\t<type>\t<s-expression>`
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.id, self.query_type, self.expr)
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let mut parts = line.splitn(3, '\t');
        let (Some(id), Some(tag), Some(text)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Structure(
                "expected `<id>\\t<type>\\t<s-expression>`".into(),
            ));
        };
        let ty: QueryType = tag.parse()?;
        let q = GroundedQuery::new(id, parse(text)?);
        if q.query_type != ty {
            return Err(Error::Structure(format!(
                "query `{id}` is tagged {ty} but has shape {}",
                q.query_type
            )));
        }
        Ok(q)
    }
}

pub fn write_queries(path: impl AsRef<Path>, queries: &[GroundedQuery]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for q in queries {
        writeln!(text, "{}", q.to_line()).expect("write to string");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_queries(path: impl AsRef<Path>) -> Result<Vec<GroundedQuery>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            GroundedQuery::from_line(l.trim_end_matches('\r')).map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
