//! Text templates for prompts and completions.
//!
//! Both formats are byte-stable: the same inputs always render to the same
//! string, and the completion format is what [`crate::eval::parse_prediction`]
//! reads back.

use std::fmt::Write;

use crate::exec::{ChainEvaluation, EntitySet};
use crate::kg::{KnowledgeGraph, Triple};
use crate::query::QueryExpr;
use crate::tree::DecompositionChain;

/// Instruction paragraph placed at the top of every prompt.
pub const INSTRUCTION: &str = include_str!("../assets/instruction_v1.txt");
pub const INSTRUCTION_VERSION: &str = "v1";

/// Entities shown per `STEP` line before the `…+N more` suffix.
pub const DEFAULT_STEP_DISPLAY_CAP: usize = 16;

pub const CONTEXT_HEADER: &str = "CONTEXT:";
pub const QUERY_PREFIX: &str = "QUERY: ";
pub const MEANING_PREFIX: &str = "MEANING: ";
pub const FINAL_PREFIX: &str = "FINAL: ";

pub fn render_triple(triple: &Triple, graph: &KnowledgeGraph) -> String {
    format!(
        "({}, {}, {})",
        graph.entity_label(triple.head),
        graph.relation_label(triple.relation),
        graph.entity_label(triple.tail)
    )
}

/// Instruction, context block and query lines.
pub fn render_prompt(query: &QueryExpr, context: &[Triple], graph: &KnowledgeGraph) -> String {
    let mut out = String::with_capacity(INSTRUCTION.len() + 40 * context.len() + 128);
    out.push_str(INSTRUCTION.trim_end());
    out.push_str("\n\n");
    out.push_str(CONTEXT_HEADER);
    out.push('\n');
    if context.is_empty() {
        out.push_str("(none)\n");
    }
    for t in context {
        out.push_str(&render_triple(t, graph));
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(out, "{QUERY_PREFIX}{query}");
    let _ = write!(out, "{MEANING_PREFIX}find {}.", paraphrase(query, graph));
    out
}

/// English reading of the query structure.
pub fn paraphrase(expr: &QueryExpr, graph: &KnowledgeGraph) -> String {
    match expr {
        QueryExpr::Entity(e) => graph.entity_label(*e).into_owned(),
        QueryExpr::Proj {
            relation,
            inverse,
            child,
        } => {
            let rel = graph.relation_label(*relation);
            let inner = nested(child, graph);
            if *inverse {
                format!("entities whose {rel} is {inner}")
            } else {
                format!("the {rel} of {inner}")
            }
        }
        QueryExpr::And(cs) => {
            let parts: Vec<String> = cs
                .iter()
                .map(|c| {
                    let p = nested(&c.expr, graph);
                    if c.negated {
                        format!("not {p}")
                    } else {
                        p
                    }
                })
                .collect();
            format!("both {}", parts.join(" and "))
        }
        QueryExpr::Or(children) => {
            let parts: Vec<String> = children.iter().map(|c| nested(c, graph)).collect();
            format!("either {}", parts.join(" or "))
        }
    }
}

fn nested(expr: &QueryExpr, graph: &KnowledgeGraph) -> String {
    match expr {
        QueryExpr::Entity(_) => paraphrase(expr, graph),
        _ => format!("[{}]", paraphrase(expr, graph)),
    }
}

/// `{a, b, c}` with at most `cap` labels, then `…+N more`.
pub fn render_set(set: &EntitySet, graph: &KnowledgeGraph, cap: Option<usize>) -> String {
    let shown = cap.unwrap_or(usize::MAX).min(set.len());
    let mut parts: Vec<String> = set
        .iter()
        .take(shown)
        .map(|e| graph.entity_label(e).into_owned())
        .collect();
    if shown < set.len() {
        parts.push(format!("…+{} more", set.len() - shown));
    }
    format!("{{{}}}", parts.join(", "))
}

/// One `STEP k: ... = {..}` line per subquery and a `FINAL:` line with the
/// full answer set.
pub fn render_completion(
    chain: &DecompositionChain,
    eval: &ChainEvaluation,
    graph: &KnowledgeGraph,
    step_cap: usize,
) -> String {
    let mut out = String::new();
    for (line, value) in chain.lines().zip(&eval.steps) {
        let _ = writeln!(out, "{line} = {}", render_set(value, graph, Some(step_cap)));
    }
    out.push_str(FINAL_PREFIX);
    out.push_str(&render_set(&eval.final_answers, graph, None));
    out
}
