//! Line-oriented text format for knowledge bases.
//!
//! ```text
//! # comment
//! variable <name> <state> [<state> ...]
//! support <id> [<tail>, <tail>, ...] -> <head> weight <w>
//! support <id> [] -> <head> prob <p>
//! evidence <name>=<state>
//! ```
//!
//! Tails, heads, and evidence are written `variable=state`; a bare variable
//! name is accepted when the variable has exactly one state. Variables must
//! be declared before any support or evidence line that references them.

use super::{
    weight_from_probability, Adjacency, INodeId, KnowledgeGraph, ModelError,
};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept `weight 0` lines (needed only for internally generated
    /// constructs; disallowed by default).
    pub allow_zero_weights: bool,
}

/// A parsed file: the graph plus any `evidence` declarations, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct BkbFile {
    pub graph: KnowledgeGraph,
    pub evidence: Vec<INodeId>,
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, PartialEq)]
pub enum ParseErrorKind {
    UnknownDirective(String),
    Expected(&'static str),
    TrailingTokens,
    BadNumber(String),
    NonpositiveWeight(f64),
    Model(ModelError),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnknownDirective(d) => write!(f, "unknown directive `{d}`"),
            ParseErrorKind::Expected(what) => write!(f, "expected {what}"),
            ParseErrorKind::TrailingTokens => write!(f, "unexpected trailing tokens"),
            ParseErrorKind::BadNumber(t) => write!(f, "`{t}` is not a number"),
            ParseErrorKind::NonpositiveWeight(w) => write!(f, "weight {w} must be positive"),
            ParseErrorKind::Model(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &line[i..];
        let c = rest.chars().next().unwrap();
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if matches!(c, '[' | ']' | ',') {
            toks.push(Tok {
                text: &line[i..i + 1],
                column: i + 1,
            });
            i += 1;
            continue;
        }
        if rest.starts_with("->") {
            toks.push(Tok {
                text: &line[i..i + 2],
                column: i + 1,
            });
            i += 2;
            continue;
        }
        let start = i;
        while i < bytes.len() {
            let rest = &line[i..];
            let c = rest.chars().next().unwrap();
            if c.is_whitespace() || matches!(c, '[' | ']' | ',' | '#') || rest.starts_with("->") {
                break;
            }
            i += c.len_utf8();
        }
        toks.push(Tok {
            text: &line[start..i],
            column: start + 1,
        });
    }
    toks
}

struct Cursor<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<Tok<'a>> {
        self.toks.get(self.pos).copied()
    }

    fn next(&mut self, what: &'static str) -> Result<Tok<'a>, ParseError> {
        let tok = self.toks.get(self.pos).copied().ok_or(ParseError {
            line: self.line,
            column: self.end_column(),
            kind: ParseErrorKind::Expected(what),
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn expect(&mut self, literal: &'static str) -> Result<(), ParseError> {
        let tok = self.next(literal)?;
        if tok.text != literal {
            return Err(ParseError {
                line: self.line,
                column: tok.column,
                kind: ParseErrorKind::Expected(literal),
            });
        }
        Ok(())
    }

    fn end_column(&self) -> usize {
        self.toks
            .last()
            .map(|t| t.column + t.text.len())
            .unwrap_or(1)
    }

    fn finish(&self) -> Result<(), ParseError> {
        if let Some(tok) = self.peek() {
            return Err(ParseError {
                line: self.line,
                column: tok.column,
                kind: ParseErrorKind::TrailingTokens,
            });
        }
        Ok(())
    }

    fn fail(&self, tok: Tok<'a>, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: tok.column,
            kind,
        }
    }
}

fn parse_number<'a>(
    cur: &mut Cursor<'a>,
    what: &'static str,
) -> Result<(f64, Tok<'a>), ParseError> {
    let tok = cur.next(what)?;
    match tok.text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok((v, tok)),
        _ => Err(ParseError {
            line: cur.line,
            column: tok.column,
            kind: ParseErrorKind::BadNumber(tok.text.to_string()),
        }),
    }
}

/// Parses the text format into a graph plus declared evidence.
pub fn parse_bkb(text: &str) -> Result<BkbFile, ParseError> {
    parse_bkb_with(text, ParseOptions::default())
}

pub fn parse_bkb_with(text: &str, options: ParseOptions) -> Result<BkbFile, ParseError> {
    let mut graph = KnowledgeGraph::new();
    let mut evidence: Vec<INodeId> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let toks = tokenize(raw);
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks,
            pos: 0,
            line: lineno + 1,
        };
        let head = cur.next("directive")?;
        match head.text {
            "variable" => {
                let name = cur.next("variable name")?;
                let mut states = Vec::new();
                while let Some(tok) = cur.peek() {
                    cur.pos += 1;
                    states.push(tok.text);
                }
                if states.is_empty() {
                    return Err(ParseError {
                        line: cur.line,
                        column: cur.end_column(),
                        kind: ParseErrorKind::Expected("at least one state"),
                    });
                }
                graph
                    .add_variable(name.text, &states)
                    .map_err(|e| cur.fail(name, ParseErrorKind::Model(e)))?;
            }
            "support" => {
                let name = cur.next("support id")?;
                cur.expect("[")?;
                let mut tails = Vec::new();
                if cur.peek().map(|t| t.text) != Some("]") {
                    loop {
                        let tok = cur.next("tail I-node")?;
                        let inode = graph
                            .resolve_inode(tok.text)
                            .map_err(|e| cur.fail(tok, ParseErrorKind::Model(e)))?;
                        tails.push(inode);
                        let sep = cur.next("`,` or `]`")?;
                        match sep.text {
                            "," => continue,
                            "]" => break,
                            _ => {
                                return Err(cur.fail(sep, ParseErrorKind::Expected("`,` or `]`")))
                            }
                        }
                    }
                } else {
                    cur.expect("]")?;
                }
                cur.expect("->")?;
                let head_tok = cur.next("head I-node")?;
                let head_inode = graph
                    .resolve_inode(head_tok.text)
                    .map_err(|e| cur.fail(head_tok, ParseErrorKind::Model(e)))?;
                let kind = cur.next("`weight` or `prob`")?;
                let weight = match kind.text {
                    "weight" => {
                        let (w, tok) = parse_number(&mut cur, "weight value")?;
                        let ok = w > 0.0 || (options.allow_zero_weights && w == 0.0);
                        if !ok {
                            return Err(cur.fail(tok, ParseErrorKind::NonpositiveWeight(w)));
                        }
                        w
                    }
                    "prob" => {
                        let (p, tok) = parse_number(&mut cur, "probability value")?;
                        weight_from_probability(p)
                            .map_err(|e| cur.fail(tok, ParseErrorKind::Model(e)))?
                    }
                    _ => {
                        return Err(cur.fail(kind, ParseErrorKind::Expected("`weight` or `prob`")))
                    }
                };
                cur.finish()?;
                graph
                    .add_support(name.text, &tails, head_inode, weight)
                    .map_err(|e| cur.fail(name, ParseErrorKind::Model(e)))?;
            }
            "evidence" => {
                let tok = cur.next("evidence I-node")?;
                let inode = graph
                    .resolve_inode(tok.text)
                    .map_err(|e| cur.fail(tok, ParseErrorKind::Model(e)))?;
                cur.finish()?;
                if !evidence.contains(&inode) {
                    evidence.push(inode);
                }
            }
            other => {
                return Err(cur.fail(head, ParseErrorKind::UnknownDirective(other.to_string())));
            }
        }
    }
    Ok(BkbFile { graph, evidence })
}

#[derive(Debug, Error, PartialEq)]
pub enum SerializeError {
    #[error("graph is structurally invalid; run validate for details")]
    InvalidStructure,
}

/// Renders a graph (plus evidence) back into the text format. The output
/// parses back to an identical graph.
pub fn serialize_bkb(file: &BkbFile) -> Result<String, SerializeError> {
    let graph = &file.graph;
    let adj = Adjacency::build(graph).ok_or(SerializeError::InvalidStructure)?;
    let mut out = String::new();
    for var in &graph.variables {
        out.push_str("variable ");
        out.push_str(&var.name);
        for state in &var.states {
            out.push(' ');
            out.push_str(state);
        }
        out.push('\n');
    }
    if !graph.s_nodes.is_empty() {
        out.push('\n');
    }
    for s in graph.s_node_ids() {
        let tails = adj
            .tails(s)
            .iter()
            .map(|&t| graph.label(t))
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!(
            "support {} [{}] -> {} weight {}\n",
            graph.s_node(s).name,
            tails,
            graph.label(adj.head(s)),
            graph.weight(s)
        ));
    }
    if !file.evidence.is_empty() {
        out.push('\n');
        for &e in &file.evidence {
            out.push_str(&format!("evidence {}\n", graph.label(e)));
        }
    }
    Ok(out)
}
