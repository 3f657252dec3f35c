//! Parser for the s-expression query syntax.
//!
//! ```text
//! E := (e <int>) | (p <int> E) | (pi <int> E) | (and E E+) | (or E E+) | (not E)
//! ```
//!
//! `(pi r E)` projects backwards along `r`. `(not E)` may only appear as a
//! direct operand of `(and ...)`, where it becomes a negated conjunct.

use crate::error::{Error, Result};
use crate::query::expr::{Conjunct, QueryExpr};

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(input: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in input.char_indices() {
        let is_delim = ch == '(' || ch == ')' || ch.is_whitespace();
        if is_delim {
            if let Some(s) = start.take() {
                out.push((s, Tok::Atom(&input[s..i])));
            }
            match ch {
                '(' => out.push((i, Tok::Open)),
                ')' => out.push((i, Tok::Close)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, Tok::Atom(&input[s..])));
    }
    out
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    end: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(usize, Tok<'a>)> {
        self.toks.get(self.pos)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |(o, _)| *o)
    }

    fn next(&mut self) -> Result<(usize, Tok<'a>)> {
        let tok = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| syntax(self.end, "unexpected end of input (unbalanced parenthesis)"))?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect_close(&mut self) -> Result<()> {
        match self.next()? {
            (_, Tok::Close) => Ok(()),
            (o, tok) => Err(syntax(o, format!("expected `)`, found {}", describe(&tok)))),
        }
    }

    fn int(&mut self) -> Result<u32> {
        match self.next()? {
            (o, Tok::Atom(s)) => s
                .parse()
                .map_err(|_| syntax(o, format!("expected a non-negative integer, found `{s}`"))),
            (o, tok) => Err(syntax(o, format!("expected an integer, found {}", describe(&tok)))),
        }
    }

    /// Parses one form. Returns the expression and whether it was wrapped in
    /// `(not ...)`, which is only accepted when `in_and` is set.
    fn form(&mut self, in_and: bool) -> Result<(QueryExpr, bool)> {
        let open = match self.next()? {
            (o, Tok::Open) => o,
            (o, tok) => return Err(syntax(o, format!("expected `(`, found {}", describe(&tok)))),
        };
        let (head_off, head) = match self.next()? {
            (o, Tok::Atom(s)) => (o, s),
            (o, tok) => {
                return Err(syntax(o, format!("expected an operator, found {}", describe(&tok))))
            }
        };
        let expr = match head {
            "e" => {
                let id = self.int()?;
                QueryExpr::Entity(id)
            }
            "p" | "pi" => {
                let relation = self.int()?;
                let (child, _) = self.form(false)?;
                QueryExpr::Proj {
                    relation,
                    inverse: head == "pi",
                    child: Box::new(child),
                }
            }
            "and" => {
                let mut conjuncts = Vec::new();
                while matches!(self.peek(), Some((_, Tok::Open))) {
                    let (expr, negated) = self.form(true)?;
                    conjuncts.push(Conjunct { expr, negated });
                }
                self.expect_close()?;
                if conjuncts.len() < 2 {
                    return Err(Error::Structure(format!(
                        "`and` at byte {open} needs at least two operands"
                    )));
                }
                if conjuncts.iter().all(|c| c.negated) {
                    return Err(Error::Structure(format!(
                        "`and` at byte {open} has no positive operand"
                    )));
                }
                return Ok((QueryExpr::And(conjuncts), false));
            }
            "or" => {
                let mut children = Vec::new();
                while matches!(self.peek(), Some((_, Tok::Open))) {
                    let (expr, _) = self.form(false)?;
                    children.push(expr);
                }
                self.expect_close()?;
                if children.len() < 2 {
                    return Err(Error::Structure(format!(
                        "`or` at byte {open} needs at least two operands"
                    )));
                }
                return Ok((QueryExpr::Or(children), false));
            }
            "not" => {
                if !in_and {
                    return Err(Error::Structure(format!(
                        "`not` at byte {open} is only allowed directly inside `and`"
                    )));
                }
                let (inner, _) = self.form(false)?;
                self.expect_close()?;
                return Ok((inner, true));
            }
            other => return Err(syntax(head_off, format!("unknown operator `{other}`"))),
        };
        self.expect_close()?;
        Ok((expr, false))
    }
}

fn describe(tok: &Tok<'_>) -> String {
    match tok {
        Tok::Open => "`(`".into(),
        Tok::Close => "`)`".into(),
        Tok::Atom(s) => format!("`{s}`"),
    }
}

pub fn parse(text: &str) -> Result<QueryExpr> {
    let mut p = Parser {
        toks: tokenize(text),
        pos: 0,
        end: text.len(),
    };
    let (expr, _) = p.form(false)?;
    if p.pos < p.toks.len() {
        return Err(syntax(p.offset(), "trailing input after query"));
    }
    Ok(expr)
}
