//! GML (Graph Modelling Language).
//!
//! ```text
//! graph [
//!   directed 0
//!   node [
//!     id 0
//!     color "red"
//!   ]
//!   edge [
//!     source 0
//!     target 1
//!     weight 3
//!   ]
//! ]
//! ```
//!
//! Keys match `[A-Za-z][A-Za-z0-9_]*`. Integers are bare digits, reals always
//! carry a `.` (optionally an exponent), text is double-quoted with `\"` and
//! `\\` escapes, booleans are the bare words `true` and `false`. Compact mode
//! puts everything on one line separated by single spaces.

use super::{assemble, check_reserved, line_col, FormatKind, FormatSpec, TextError};
use crate::graph::{AttrMap, AttrValue, AttributedGraph};
use crate::numfmt;

const FMT: FormatKind = FormatKind::Gml;

/// `true` and `false` lex as boolean values, so they cannot be keys.
fn valid_key(k: &str) -> bool {
    if k == "true" || k == "false" {
        return false;
    }
    let mut chars = k.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn value_text(v: &AttrValue) -> String {
    match v {
        AttrValue::Int(i) => i.to_string(),
        AttrValue::Real(r) => numfmt::real(*r),
        AttrValue::Bool(b) => b.to_string(),
        AttrValue::Text(s) => {
            let mut out = String::with_capacity(s.len() + 2);
            out.push('"');
            for c in s.chars() {
                if c == '"' || c == '\\' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('"');
            out
        }
    }
}

struct Writer<'a> {
    out: String,
    spec: &'a FormatSpec,
    depth: usize,
}

impl Writer<'_> {
    fn line(&mut self, s: &str) {
        if self.spec.compact {
            if !self.out.is_empty() {
                self.out.push(' ');
            }
        } else {
            if !self.out.is_empty() {
                self.out.push('\n');
            }
            for _ in 0..self.depth {
                self.out.push_str("  ");
            }
        }
        self.out.push_str(s);
    }

    fn open(&mut self, key: &str) {
        self.line(&format!("{key} ["));
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        self.line("]");
    }

    fn attrs(&mut self, attrs: &AttrMap) -> Result<(), TextError> {
        for (k, v) in self.spec.ordered(attrs) {
            if !valid_key(k) {
                return Err(TextError::Render {
                    format: FMT,
                    message: format!("attribute name {k:?} is not a GML key; use letters, digits and '_', starting with a letter"),
                });
            }
            self.line(&format!("{k} {}", value_text(v)));
        }
        Ok(())
    }
}

pub fn render(g: &AttributedGraph, spec: &FormatSpec) -> Result<String, TextError> {
    check_reserved(FMT, g.graph_attrs(), &["directed", "node", "edge"], "graph")?;
    let mut w = Writer {
        out: String::new(),
        spec,
        depth: 0,
    };
    w.open("graph");
    w.line(if g.directed() { "directed 1" } else { "directed 0" });
    w.attrs(g.graph_attrs())?;
    for n in g.nodes() {
        check_reserved(FMT, &n.attrs, &["id"], "node")?;
        w.open("node");
        w.line(&format!("id {}", n.id));
        w.attrs(&n.attrs)?;
        w.close();
    }
    for e in g.edges() {
        check_reserved(FMT, &e.attrs, &["source", "target"], "edge")?;
        w.open("edge");
        w.line(&format!("source {}", e.src));
        w.line(&format!("target {}", e.dst));
        w.attrs(&e.attrs)?;
        w.close();
    }
    w.close();
    w.out.push('\n');
    Ok(w.out)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Key(String),
    Open,
    Close,
    Value(AttrValue),
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, at: usize, message: impl Into<String>) -> TextError {
        let (line, column) = line_col(self.text, at);
        TextError::Parse {
            format: FMT,
            line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<Option<(usize, Tok)>, TextError> {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        // '#' starts a comment running to end of line
        if self.pos < bytes.len() && bytes[self.pos] == b'#' {
            while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                self.pos += 1;
            }
            return self.next();
        }
        let start = self.pos;
        let Some(&b) = bytes.get(start) else {
            return Ok(None);
        };
        let tok = match b {
            b'[' => {
                self.pos += 1;
                Tok::Open
            }
            b']' => {
                self.pos += 1;
                Tok::Close
            }
            b'"' => {
                let mut s = String::new();
                let mut chars = self.text[start + 1..].char_indices();
                loop {
                    match chars.next() {
                        None => return Err(self.err(start, "unterminated string")),
                        Some((i, '"')) => {
                            self.pos = start + 1 + i + 1;
                            break;
                        }
                        Some((i, '\\')) => match chars.next() {
                            Some((_, c @ ('"' | '\\'))) => s.push(c),
                            _ => return Err(self.err(start + 1 + i, "invalid escape in string")),
                        },
                        Some((_, c)) => s.push(c),
                    }
                }
                Tok::Value(AttrValue::Text(s))
            }
            _ => {
                let end = self.text[start..]
                    .find(|c: char| c.is_ascii_whitespace() || c == '[' || c == ']' || c == '"')
                    .map_or(self.text.len(), |i| start + i);
                self.pos = end;
                let word = &self.text[start..end];
                if word == "true" || word == "false" {
                    Tok::Value(AttrValue::Bool(word == "true"))
                } else if valid_key(word) {
                    Tok::Key(word.to_string())
                } else if let Ok(i) = word.parse::<i64>() {
                    Tok::Value(AttrValue::Int(i))
                } else if word.contains(['.', 'e', 'E']) {
                    match word.parse::<f64>() {
                        Ok(r) if r.is_finite() => Tok::Value(AttrValue::Real(r)),
                        _ => return Err(self.err(start, format!("invalid number {word:?}"))),
                    }
                } else {
                    return Err(self.err(start, format!("unexpected token {word:?}")));
                }
            }
        };
        Ok(Some((start, tok)))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Result<Option<(usize, Tok)>, TextError> {
        self.lex.next()
    }

    fn expect_open(&mut self, key: &str) -> Result<(), TextError> {
        match self.next()? {
            Some((_, Tok::Open)) => Ok(()),
            Some((at, _)) => Err(self.lex.err(at, format!("expected '[' after {key}"))),
            None => Err(self.lex.err(self.lex.text.len(), format!("input ends after {key}"))),
        }
    }

    /// Reads `key value` pairs up to the closing bracket; nested lists are handed to `nested`.
    fn body(
        &mut self,
        mut nested: impl FnMut(&mut Self, usize, &str) -> Result<(), TextError>,
    ) -> Result<Vec<(usize, String, AttrValue)>, TextError> {
        let mut pairs = Vec::new();
        loop {
            match self.next()? {
                Some((_, Tok::Close)) => return Ok(pairs),
                Some((at, Tok::Key(k))) => match self.next()? {
                    Some((_, Tok::Value(v))) => {
                        if pairs.iter().any(|(_, name, _)| *name == k) {
                            return Err(self.lex.err(at, format!("duplicate key {k:?}")));
                        }
                        pairs.push((at, k, v));
                    }
                    Some((_, Tok::Open)) => nested(self, at, &k)?,
                    Some((vat, _)) => return Err(self.lex.err(vat, format!("expected a value for {k:?}"))),
                    None => return Err(self.lex.err(self.lex.text.len(), "input ends inside a list")),
                },
                Some((at, _)) => return Err(self.lex.err(at, "expected a key or ']'")),
                None => return Err(self.lex.err(self.lex.text.len(), "input ends inside a list (missing ']')")),
            }
        }
    }
}

fn take_int(
    p: &Parser<'_>,
    pairs: &mut Vec<(usize, String, AttrValue)>,
    key: &str,
    at: usize,
    owner: &str,
) -> Result<i64, TextError> {
    let i = pairs
        .iter()
        .position(|(_, k, _)| k == key)
        .ok_or_else(|| p.lex.err(at, format!("{owner} has no {key}")))?;
    let (vat, _, v) = pairs.remove(i);
    match v {
        AttrValue::Int(i) => Ok(i),
        _ => Err(p.lex.err(vat, format!("{owner} {key} must be an integer"))),
    }
}

fn to_map(pairs: Vec<(usize, String, AttrValue)>) -> AttrMap {
    pairs.into_iter().map(|(_, k, v)| (k, v)).collect()
}

pub fn parse(text: &str) -> Result<AttributedGraph, TextError> {
    let mut p = Parser {
        lex: Lexer { text, pos: 0 },
    };
    let mut preamble = true;
    loop {
        match p.next()? {
            Some((_, Tok::Key(k))) if k == "graph" => break,
            // a leading `Creator "..."` line is tolerated
            Some((_, Tok::Key(k))) if preamble && k == "Creator" => match p.next()? {
                Some((_, Tok::Value(AttrValue::Text(_)))) => preamble = false,
                _ => return Err(p.lex.err(0, "Creator must be followed by a string")),
            },
            Some((at, _)) => return Err(p.lex.err(at, "expected 'graph ['")),
            None => return Err(p.lex.err(text.len(), "empty input: expected 'graph ['")),
        }
    }
    p.expect_open("graph")?;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut pairs = p.body(|p, at, key| {
        match key {
            "node" => {
                let mut body = p.body(|p, at, k| Err(unsupported_list(p, at, k)))?;
                let id = take_int(p, &mut body, "id", at, "node")?;
                nodes.push((id, to_map(body)));
            }
            "edge" => {
                let mut body = p.body(|p, at, k| Err(unsupported_list(p, at, k)))?;
                let s = take_int(p, &mut body, "source", at, "edge")?;
                let t = take_int(p, &mut body, "target", at, "edge")?;
                edges.push((s, t, to_map(body)));
            }
            other => return Err(unsupported_list(p, at, other)),
        }
        Ok(())
    })?;
    if let Some((at, _)) = p.next()? {
        return Err(p.lex.err(at, "content after the closing ']' of graph"));
    }
    let directed = match pairs.iter().position(|(_, k, _)| k == "directed") {
        None => false,
        Some(i) => match pairs.remove(i) {
            (_, _, AttrValue::Int(0)) => false,
            (_, _, AttrValue::Int(1)) => true,
            (at, _, _) => return Err(p.lex.err(at, "directed must be 0 or 1")),
        },
    };
    assemble(FMT, directed, to_map(pairs), nodes, edges)
}

fn unsupported_list(p: &Parser<'_>, at: usize, key: &str) -> TextError {
    let (line, column) = line_col(p.lex.text, at);
    TextError::Unsupported {
        format: FMT,
        message: format!("nested list {key:?} at line {line}, column {column}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{attrs, from_edges, GraphBuilder};

    #[test]
    fn minimal_compact() {
        let g = from_edges(2, false, &[(0, 1)]).unwrap();
        let s = render(&g, &FormatSpec::compact(FMT)).unwrap();
        assert_eq!(
            s,
            "graph [ directed 0 node [ id 0 ] node [ id 1 ] edge [ source 0 target 1 ] ]\n"
        );
        assert_eq!(parse(&s).unwrap(), g);
    }

    #[test]
    fn typed_values_roundtrip() {
        let mut b = GraphBuilder::new(true).graph_attr("name", "t\"q\\");
        b.add_node(attrs([("a", AttrValue::Real(2.0)), ("b", AttrValue::Bool(false))]));
        b.add_node(attrs([("a", AttrValue::Int(-4)), ("c", AttrValue::text("1.5"))]));
        b.add_edge(1, 0, attrs([("w", AttrValue::Real(1e-7))]));
        let g = b.build().unwrap();
        let s = render(&g, &FormatSpec::new(FMT)).unwrap();
        assert!(s.contains("name \"t\\\"q\\\\\""));
        assert!(s.contains("a 2.0"));
        assert_eq!(parse(&s).unwrap(), g);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("graph [ node [ id 0 ]"), Err(TextError::Parse { .. })));
        assert!(matches!(
            parse("graph [ node [ id 0 graphics [ x 1 ] ] ]"),
            Err(TextError::Unsupported { .. })
        ));
        assert!(matches!(
            parse("graph [ node [ id 0 ] node [ id 0 ] ]"),
            Err(TextError::Validation { .. })
        ));
        let bad = GraphBuilder::undirected().graph_attr("bad key", 1i64).build().unwrap();
        assert!(matches!(render(&bad, &FormatSpec::new(FMT)), Err(TextError::Render { .. })));
        match parse("graph [\n  node [ id x ]\n]") {
            Err(TextError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
