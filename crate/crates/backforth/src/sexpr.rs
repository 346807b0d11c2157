//! Text and JSON serialization for formula DAGs.
//!
//! The text form is an s-expression. Variables are bare integers, so `(R 0
//! 1)` applies relation R to variables v0 and v1, `(forall 1 ...)` binds v1,
//! and `(= 0 1)` is equality. Connectives are `and`, `or`, `not`, `exists`,
//! `forall`. When the DAG shares a non-atomic node between two or more
//! parents the printer hoists it into a `(defs (f0 BODY) ... ROOT)` header
//! and bodies refer to it by name; relation names are validated to never
//! collide with the `f<digits>` namespace or with bare integers, so parsing
//! needs no lookahead tricks.
//!
//! The JSON export is a flat node array in dependency order (children before
//! parents) plus a root index, for consumers that want the DAG rather than
//! the tree unfolding.

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::formula::{FormulaError, FormulaId, FormulaNode, FormulaPool};
use crate::structure::validate_name;

#[derive(Debug, Error)]
pub enum SexprError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: u32, col: u32, msg: String },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

fn children_of(node: &FormulaNode) -> Vec<FormulaId> {
    match node {
        FormulaNode::Atom { .. } | FormulaNode::Equal(_, _) => vec![],
        FormulaNode::Not(c) | FormulaNode::Exists(_, c) | FormulaNode::Forall(_, c) => vec![*c],
        FormulaNode::Conj(cs) | FormulaNode::Disj(cs) => cs.clone(),
    }
}

/// Reachable node ids in ascending order. Interning guarantees children have
/// smaller ids than their parents, so this is also a dependency order.
fn reachable(pool: &FormulaPool, root: FormulaId) -> Vec<FormulaId> {
    let mut seen = HashSet::new();
    let mut stack = vec![root];
    while let Some(f) = stack.pop() {
        if seen.insert(f) {
            stack.extend(children_of(pool.node(f)));
        }
    }
    let mut ids: Vec<FormulaId> = seen.into_iter().collect();
    ids.sort_unstable();
    ids
}

fn render(
    pool: &FormulaPool,
    f: FormulaId,
    names: &HashMap<FormulaId, String>,
    top: bool,
    out: &mut String,
) {
    if !top {
        if let Some(name) = names.get(&f) {
            out.push_str(name);
            return;
        }
    }
    match pool.node(f) {
        FormulaNode::Atom { rel, args } => {
            out.push('(');
            out.push_str(rel);
            for &v in args {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push(')');
        }
        FormulaNode::Equal(a, b) => {
            out.push_str(&format!("(= {a} {b})"));
        }
        FormulaNode::Not(c) => {
            out.push_str("(not ");
            render(pool, *c, names, false, out);
            out.push(')');
        }
        FormulaNode::Conj(cs) | FormulaNode::Disj(cs) => {
            let head = match pool.node(f) {
                FormulaNode::Conj(_) => "(and",
                _ => "(or",
            };
            out.push_str(head);
            for &c in cs {
                out.push(' ');
                render(pool, c, names, false, out);
            }
            out.push(')');
        }
        FormulaNode::Exists(v, c) => {
            out.push_str(&format!("(exists {v} "));
            render(pool, *c, names, false, out);
            out.push(')');
        }
        FormulaNode::Forall(v, c) => {
            out.push_str(&format!("(forall {v} "));
            render(pool, *c, names, false, out);
            out.push(')');
        }
    }
}

/// Print a formula. Non-atomic nodes referenced more than once become
/// definitions, emitted in dependency order.
pub fn to_sexpr(pool: &FormulaPool, f: FormulaId) -> String {
    let ids = reachable(pool, f);
    let mut refs: HashMap<FormulaId, u32> = HashMap::new();
    for &id in &ids {
        for c in children_of(pool.node(id)) {
            *refs.entry(c).or_insert(0) += 1;
        }
    }
    let mut names = HashMap::new();
    let mut defs = Vec::new();
    for &id in &ids {
        let shared = refs.get(&id).copied().unwrap_or(0) >= 2;
        let atomic = matches!(
            pool.node(id),
            FormulaNode::Atom { .. } | FormulaNode::Equal(_, _)
        );
        if shared && !atomic && id != f {
            names.insert(id, format!("f{}", defs.len()));
            defs.push(id);
        }
    }
    let mut out = String::new();
    if defs.is_empty() {
        render(pool, f, &names, true, &mut out);
    } else {
        out.push_str("(defs");
        for &d in &defs {
            out.push_str("\n  (");
            out.push_str(&names[&d]);
            out.push(' ');
            render(pool, d, &names, true, &mut out);
            out.push(')');
        }
        out.push_str("\n  ");
        render(pool, f, &names, true, &mut out);
        out.push(')');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Sym(String),
}

struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, SexprError> {
    let mut toks = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '(' => {
                toks.push(Spanned { tok: Tok::Open, line, col });
                chars.next();
                col += 1;
            }
            ')' => {
                toks.push(Spanned { tok: Tok::Close, line, col });
                chars.next();
                col += 1;
            }
            _ => {
                let (start_line, start_col) = (line, col);
                let mut sym = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    if c.is_control() {
                        return Err(SexprError::Parse {
                            line,
                            col,
                            msg: "control character in token".to_string(),
                        });
                    }
                    sym.push(c);
                    chars.next();
                    col += 1;
                }
                toks.push(Spanned {
                    tok: Tok::Sym(sym),
                    line: start_line,
                    col: start_col,
                });
            }
        }
    }
    Ok(toks)
}

struct Parser<'p> {
    toks: Vec<Spanned>,
    pos: usize,
    pool: &'p mut FormulaPool,
    defs: HashMap<String, FormulaId>,
}

fn is_def_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('f')
        && !chars.as_str().is_empty()
        && chars.as_str().chars().all(|c| c.is_ascii_digit())
}

impl<'p> Parser<'p> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SexprError> {
        let (line, col) = self
            .toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1));
        Err(SexprError::Parse {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_close(&mut self) -> Result<(), SexprError> {
        match self.next() {
            Some(Tok::Close) => Ok(()),
            Some(t) => {
                self.pos -= 1;
                self.err(format!("expected ')', found {}", describe(&t)))
            }
            None => self.err("expected ')', found end of input"),
        }
    }

    fn parse_var(&mut self) -> Result<u32, SexprError> {
        match self.next() {
            Some(Tok::Sym(s)) => match s.parse::<u32>() {
                Ok(v) => Ok(v),
                Err(_) => {
                    self.pos -= 1;
                    self.err(format!("expected a variable index, found {s:?}"))
                }
            },
            Some(t) => {
                self.pos -= 1;
                self.err(format!("expected a variable index, found {}", describe(&t)))
            }
            None => self.err("expected a variable index, found end of input"),
        }
    }

    fn parse_expr(&mut self) -> Result<FormulaId, SexprError> {
        match self.next() {
            Some(Tok::Sym(s)) => {
                if is_def_name(&s) {
                    match self.defs.get(&s) {
                        Some(&f) => Ok(f),
                        None => {
                            self.pos -= 1;
                            self.err(format!("reference to undefined {s}"))
                        }
                    }
                } else {
                    self.pos -= 1;
                    self.err(format!("expected a formula, found bare symbol {s:?}"))
                }
            }
            Some(Tok::Open) => self.parse_form(),
            Some(Tok::Close) => {
                self.pos -= 1;
                self.err("expected a formula, found ')'")
            }
            None => self.err("expected a formula, found end of input"),
        }
    }

    /// Parse the form after an already-consumed '('.
    fn parse_form(&mut self) -> Result<FormulaId, SexprError> {
        let head = match self.next() {
            Some(Tok::Sym(s)) => s,
            Some(t) => {
                self.pos -= 1;
                return self.err(format!("expected an operator, found {}", describe(&t)));
            }
            None => return self.err("expected an operator, found end of input"),
        };
        match head.as_str() {
            "and" | "or" => {
                let mut children = Vec::new();
                while self.peek() != Some(&Tok::Close) {
                    if self.peek().is_none() {
                        return self.err("unterminated connective, expected ')'");
                    }
                    children.push(self.parse_expr()?);
                }
                self.next();
                Ok(if head == "and" {
                    self.pool.conj(children)
                } else {
                    self.pool.disj(children)
                })
            }
            "not" => {
                let c = self.parse_expr()?;
                self.expect_close()?;
                Ok(self.pool.not(c))
            }
            "exists" | "forall" => {
                let v = self.parse_var()?;
                let c = self.parse_expr()?;
                self.expect_close()?;
                Ok(if head == "exists" {
                    self.pool.exists(v, c)?
                } else {
                    self.pool.forall(v, c)?
                })
            }
            "=" => {
                let a = self.parse_var()?;
                let b = self.parse_var()?;
                self.expect_close()?;
                Ok(self.pool.equal(a, b)?)
            }
            "defs" => {
                self.pos -= 1;
                self.err("defs is only allowed at the top level")
            }
            rel => {
                if validate_name(rel).is_err() {
                    self.pos -= 1;
                    return self.err(format!("invalid relation name {rel:?}"));
                }
                let rel = rel.to_string();
                let mut args = Vec::new();
                while self.peek() != Some(&Tok::Close) {
                    args.push(self.parse_var()?);
                }
                self.next();
                Ok(self.pool.atom(&rel, &args)?)
            }
        }
    }

    fn parse_top(&mut self) -> Result<FormulaId, SexprError> {
        // a defs wrapper, or a single plain expression
        let is_defs = matches!(
            (self.peek(), self.toks.get(self.pos + 1).map(|s| &s.tok)),
            (Some(Tok::Open), Some(Tok::Sym(s))) if s == "defs"
        );
        let root = if is_defs {
            self.pos += 2;
            loop {
                let binding = matches!(
                    (self.peek(), self.toks.get(self.pos + 1).map(|s| &s.tok)),
                    (Some(Tok::Open), Some(Tok::Sym(s))) if is_def_name(s)
                );
                if binding {
                    self.pos += 1;
                    let name = match self.next() {
                        Some(Tok::Sym(s)) => s,
                        _ => unreachable!("matched above"),
                    };
                    if self.defs.contains_key(&name) {
                        self.pos -= 1;
                        return self.err(format!("duplicate definition of {name}"));
                    }
                    let body = self.parse_expr()?;
                    self.expect_close()?;
                    self.defs.insert(name, body);
                } else {
                    if self.peek() == Some(&Tok::Close) || self.peek().is_none() {
                        return self.err("defs needs a root formula after the bindings");
                    }
                    let root = self.parse_expr()?;
                    self.expect_close()?;
                    break root;
                }
            }
        } else {
            self.parse_expr()?
        };
        if self.peek().is_some() {
            return self.err("trailing input after the formula");
        }
        Ok(root)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Open => "'('".to_string(),
        Tok::Close => "')'".to_string(),
        Tok::Sym(s) => format!("{s:?}"),
    }
}

/// Parse a printed formula into the pool. Accepts exactly what `to_sexpr`
/// emits, plus arbitrary whitespace.
pub fn parse_sexpr(pool: &mut FormulaPool, text: &str) -> Result<FormulaId, SexprError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(SexprError::Parse {
            line: 1,
            col: 1,
            msg: "empty input".to_string(),
        });
    }
    let mut parser = Parser {
        toks,
        pos: 0,
        pool,
        defs: HashMap::new(),
    };
    parser.parse_top()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum JsonNode {
    Atom { rel: String, args: Vec<u32> },
    Equal { left: u32, right: u32 },
    Not { child: u32 },
    And { children: Vec<u32> },
    Or { children: Vec<u32> },
    Exists { var: u32, child: u32 },
    Forall { var: u32, child: u32 },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct JsonDag {
    pub nodes: Vec<JsonNode>,
    pub root: u32,
}

/// Export the reachable sub-DAG as a node array (children strictly before
/// parents) plus the root's index.
pub fn to_json_dag(pool: &FormulaPool, f: FormulaId) -> JsonDag {
    let ids = reachable(pool, f);
    let renumber: HashMap<FormulaId, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i as u32))
        .collect();
    let nodes = ids
        .iter()
        .map(|&id| match pool.node(id) {
            FormulaNode::Atom { rel, args } => JsonNode::Atom {
                rel: rel.clone(),
                args: args.clone(),
            },
            FormulaNode::Equal(a, b) => JsonNode::Equal { left: *a, right: *b },
            FormulaNode::Not(c) => JsonNode::Not { child: renumber[c] },
            FormulaNode::Conj(cs) => JsonNode::And {
                children: cs.iter().map(|c| renumber[c]).collect(),
            },
            FormulaNode::Disj(cs) => JsonNode::Or {
                children: cs.iter().map(|c| renumber[c]).collect(),
            },
            FormulaNode::Exists(v, c) => JsonNode::Exists {
                var: *v,
                child: renumber[c],
            },
            FormulaNode::Forall(v, c) => JsonNode::Forall {
                var: *v,
                child: renumber[c],
            },
        })
        .collect();
    JsonDag {
        nodes,
        root: renumber[&f],
    }
}
