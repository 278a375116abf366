//! Markdown tables.
//!
//! ```text
//! Directed: no
//!
//! Graph:
//!
//! | domain |
//! | --- |
//! | web |
//!
//! Nodes:
//!
//! | id | color | weight |
//! | --- | --- | --- |
//! | 0 | red | 3 |
//!
//! Edges:
//!
//! | source | target | weight |
//! | --- | --- | --- |
//! | 0 | 1 | 3 |
//! ```
//!
//! The `Graph:` section is omitted when there are no graph attributes. Cells
//! escape `\` as `\\` and `|` as `\|`. An empty cell means the attribute is
//! absent. Unquoted cells reading as an integer, a real (with `.` or an
//! exponent) or `true`/`false` are typed values; text that would read as one
//! of those, is empty, has surrounding spaces or starts with `"` is wrapped
//! in double quotes. Compact mode drops cell padding and blank lines.

use super::{assemble, check_reserved, names_of, FormatKind, FormatSpec, TextError};
use crate::graph::{AttrMap, AttrValue, AttributedGraph};
use crate::numfmt;

const FMT: FormatKind = FormatKind::Markdown;

fn typed(cell: &str) -> Option<AttrValue> {
    match cell {
        "true" => return Some(AttrValue::Bool(true)),
        "false" => return Some(AttrValue::Bool(false)),
        _ => {}
    }
    let body = cell.strip_prefix('-').unwrap_or(cell);
    if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
        return cell.parse().ok().map(AttrValue::Int);
    }
    let numeric = body.starts_with(|c: char| c.is_ascii_digit())
        && body.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b))
        && body.contains(['.', 'e', 'E']);
    if numeric {
        return cell.parse::<f64>().ok().filter(|r| r.is_finite()).map(AttrValue::Real);
    }
    None
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|")
}

fn cell(v: &AttrValue) -> Result<String, TextError> {
    Ok(match v {
        AttrValue::Int(i) => i.to_string(),
        AttrValue::Real(r) => numfmt::real(*r),
        AttrValue::Bool(b) => b.to_string(),
        AttrValue::Text(s) => {
            if s.contains(['\n', '\r']) {
                return Err(TextError::Render {
                    format: FMT,
                    message: "a text value contains a line break, which a table cell cannot hold; replace it with a space or an escape sequence before rendering".into(),
                });
            }
            let quote = s.is_empty() || s.trim() != s || s.starts_with('"') || typed(s).is_some();
            if quote {
                format!("\"{}\"", escape(s))
            } else {
                escape(s)
            }
        }
    })
}

struct Table<'a> {
    out: &'a mut String,
    compact: bool,
}

impl Table<'_> {
    fn row(&mut self, cells: &[String]) {
        if self.compact {
            self.out.push('|');
            for c in cells {
                self.out.push_str(c);
                self.out.push('|');
            }
        } else {
            self.out.push('|');
            for c in cells {
                self.out.push(' ');
                self.out.push_str(c);
                self.out.push_str(" |");
            }
        }
        self.out.push('\n');
    }
}

fn header_name(name: &str) -> Result<String, TextError> {
    if name.trim() != name || name.starts_with('"') {
        return Err(TextError::Render {
            format: FMT,
            message: format!("attribute name {name:?} has surrounding spaces or a leading quote and cannot be a column header"),
        });
    }
    Ok(escape(name))
}

fn table(
    out: &mut String,
    spec: &FormatSpec,
    fixed: &[&str],
    names: &[&String],
    rows: Vec<(Vec<String>, &AttrMap)>,
) -> Result<(), TextError> {
    let mut t = Table {
        out,
        compact: spec.compact,
    };
    let mut header: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    for n in names {
        header.push(header_name(n)?);
    }
    let sep = vec!["---".to_string(); header.len()];
    t.row(&header);
    t.row(&sep);
    for (mut cells, attrs) in rows {
        for n in names {
            cells.push(match attrs.get(*n) {
                Some(v) => cell(v)?,
                None => String::new(),
            });
        }
        t.row(&cells);
    }
    Ok(())
}

pub fn render(g: &AttributedGraph, spec: &FormatSpec) -> Result<String, TextError> {
    let gap = if spec.compact { "\n" } else { "\n\n" };
    let mut out = format!(
        "Directed: {}{gap}",
        if g.directed() { "yes" } else { "no" }
    );
    if !g.graph_attrs().is_empty() {
        out.push_str("Graph:");
        out.push_str(gap);
        let names = names_of(&[g.graph_attrs()]);
        let names = spec.order_names(names.iter());
        table(&mut out, spec, &[], &names, vec![(vec![], g.graph_attrs())])?;
        if !spec.compact {
            out.push('\n');
        }
    }
    let node_maps: Vec<&AttrMap> = g.nodes().iter().map(|n| &n.attrs).collect();
    for m in &node_maps {
        check_reserved(FMT, m, &["id"], "node")?;
    }
    let names = names_of(&node_maps);
    let names = spec.order_names(names.iter());
    out.push_str("Nodes:");
    out.push_str(gap);
    let rows = g.nodes().iter().map(|n| (vec![n.id.to_string()], &n.attrs)).collect();
    table(&mut out, spec, &["id"], &names, rows)?;
    if !spec.compact {
        out.push('\n');
    }
    let edge_maps: Vec<&AttrMap> = g.edges().iter().map(|e| &e.attrs).collect();
    for m in &edge_maps {
        check_reserved(FMT, m, &["source", "target"], "edge")?;
    }
    let names = names_of(&edge_maps);
    let names = spec.order_names(names.iter());
    out.push_str("Edges:");
    out.push_str(gap);
    let rows = g
        .edges()
        .iter()
        .map(|e| (vec![e.src.to_string(), e.dst.to_string()], &e.attrs))
        .collect();
    table(&mut out, spec, &["source", "target"], &names, rows)?;
    Ok(out)
}

fn err(line: usize, message: impl Into<String>) -> TextError {
    TextError::Parse {
        format: FMT,
        line,
        column: 1,
        message: message.into(),
    }
}

/// Splits a table row into trimmed, unescaped cells.
fn split_row(line: &str, lineno: usize) -> Result<Vec<String>, TextError> {
    let body = line
        .trim()
        .strip_prefix('|')
        .ok_or_else(|| err(lineno, "table row must start with '|'"))?;
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = body.chars();
    let mut closed = false;
    while let Some(c) = chars.next() {
        closed = false;
        match c {
            '\\' => match chars.next() {
                Some(n @ ('\\' | '|')) => cur.push(n),
                _ => return Err(err(lineno, "invalid escape in cell (use \\\\ or \\|)")),
            },
            '|' => {
                cells.push(cur.trim().to_string());
                cur.clear();
                closed = true;
            }
            _ => cur.push(c),
        }
    }
    if !closed {
        return Err(err(lineno, "table row must end with '|'"));
    }
    Ok(cells)
}

fn value(raw: &str, lineno: usize) -> Result<Option<AttrValue>, TextError> {
    if raw.is_empty() {
        return Ok(None);
    }
    if let Some(rest) = raw.strip_prefix('"') {
        return match rest.strip_suffix('"') {
            Some(inner) => Ok(Some(AttrValue::Text(inner.to_string()))),
            None => Err(err(lineno, format!("unterminated quoted cell {raw:?}"))),
        };
    }
    Ok(Some(typed(raw).unwrap_or_else(|| AttrValue::Text(raw.to_string()))))
}

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    at: usize,
}

impl<'a> Lines<'a> {
    fn skip_blank(&mut self) {
        while self.at < self.lines.len() && self.lines[self.at].1.trim().is_empty() {
            self.at += 1;
        }
    }

    fn peek(&mut self) -> Option<(usize, &'a str)> {
        self.skip_blank();
        self.lines.get(self.at).copied()
    }

    fn last_line(&self) -> usize {
        self.lines.last().map_or(1, |l| l.0)
    }

    fn expect(&mut self, text: &str) -> Result<(), TextError> {
        match self.peek() {
            Some((_, l)) if l.trim() == text => {
                self.at += 1;
                Ok(())
            }
            Some((n, l)) => Err(err(n, format!("expected {text:?}, found {:?}", l.trim()))),
            None => Err(err(self.last_line(), format!("input ends before {text:?}"))),
        }
    }

    /// Header cells plus rows of typed cells.
    fn table(&mut self) -> Result<(Vec<String>, Vec<(usize, Vec<Option<AttrValue>>)>), TextError> {
        let (hn, hline) = self
            .peek()
            .ok_or_else(|| err(self.last_line(), "input ends before a table"))?;
        let header = split_row(hline, hn)?;
        self.at += 1;
        let (sn, sline) = self
            .lines
            .get(self.at)
            .copied()
            .ok_or_else(|| err(hn, "table has no separator row"))?;
        let sep = split_row(sline, sn)?;
        let dashes = |c: &String| {
            let c = c.trim_matches(':');
            !c.is_empty() && c.bytes().all(|b| b == b'-')
        };
        if sep.len() != header.len() || !sep.iter().all(dashes) {
            return Err(err(sn, "malformed separator row"));
        }
        self.at += 1;
        let mut rows = Vec::new();
        while let Some(&(n, line)) = self.lines.get(self.at) {
            if !line.trim_start().starts_with('|') {
                break;
            }
            let raw = split_row(line, n)?;
            if raw.len() != header.len() {
                return Err(err(n, format!("row has {} cells, header has {}", raw.len(), header.len())));
            }
            let cells = raw.iter().map(|c| value(c, n)).collect::<Result<Vec<_>, _>>()?;
            rows.push((n, cells));
            self.at += 1;
        }
        Ok((header, rows))
    }
}

fn id_cell(v: &Option<AttrValue>, n: usize, col: &str) -> Result<i64, TextError> {
    match v {
        Some(AttrValue::Int(i)) => Ok(*i),
        _ => Err(err(n, format!("{col} must be an integer"))),
    }
}

fn attr_map(header: &[String], cells: Vec<Option<AttrValue>>, skip: usize) -> AttrMap {
    header
        .iter()
        .zip(cells)
        .skip(skip)
        .filter_map(|(h, c)| c.map(|v| (h.clone(), v)))
        .collect()
}

fn check_header(header: &[String], fixed: &[&str], n: usize) -> Result<(), TextError> {
    if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
        return Err(err(n, format!("table must start with columns {fixed:?}")));
    }
    let mut seen = std::collections::BTreeSet::new();
    for h in header {
        if h.is_empty() || !seen.insert(h) {
            return Err(err(n, format!("empty or repeated column {h:?}")));
        }
    }
    Ok(())
}

pub fn parse(text: &str) -> Result<AttributedGraph, TextError> {
    let mut lines = Lines {
        lines: text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect(),
        at: 0,
    };
    let directed = match lines.peek() {
        Some((_, l)) if l.trim() == "Directed: yes" => true,
        Some((_, l)) if l.trim() == "Directed: no" => false,
        Some((n, _)) => return Err(err(n, "expected \"Directed: yes\" or \"Directed: no\"")),
        None => return Err(err(1, "empty input")),
    };
    lines.at += 1;
    let mut graph_attrs = AttrMap::new();
    if matches!(lines.peek(), Some((_, l)) if l.trim() == "Graph:") {
        lines.at += 1;
        let hn = lines.peek().map_or(1, |p| p.0);
        let (header, rows) = lines.table()?;
        check_header(&header, &[], hn)?;
        if rows.len() != 1 {
            return Err(err(hn, "graph table must have exactly one row"));
        }
        let (_, cells) = rows.into_iter().next().expect("one row");
        graph_attrs = attr_map(&header, cells, 0);
    }
    lines.expect("Nodes:")?;
    let hn = lines.peek().map_or(1, |p| p.0);
    let (header, rows) = lines.table()?;
    check_header(&header, &["id"], hn)?;
    let mut nodes = Vec::new();
    for (n, cells) in rows {
        let id = id_cell(&cells[0], n, "id")?;
        nodes.push((id, attr_map(&header, cells, 1)));
    }
    lines.expect("Edges:")?;
    let hn = lines.peek().map_or(1, |p| p.0);
    let (header, rows) = lines.table()?;
    check_header(&header, &["source", "target"], hn)?;
    let mut edges = Vec::new();
    for (n, cells) in rows {
        let s = id_cell(&cells[0], n, "source")?;
        let t = id_cell(&cells[1], n, "target")?;
        edges.push((s, t, attr_map(&header, cells, 2)));
    }
    if let Some((n, _)) = lines.peek() {
        return Err(err(n, "unexpected content after the edge table"));
    }
    assemble(FMT, directed, graph_attrs, nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{attrs, GraphBuilder};

    #[test]
    fn empty_graph_has_both_headers() {
        let g = AttributedGraph::empty(false);
        let s = render(&g, &FormatSpec::new(FMT)).unwrap();
        assert_eq!(
            s,
            "Directed: no\n\nNodes:\n\n| id |\n| --- |\n\nEdges:\n\n| source | target |\n| --- | --- |\n"
        );
        assert_eq!(parse(&s).unwrap(), g);
    }

    #[test]
    fn ambiguous_text_is_quoted() {
        let mut b = GraphBuilder::undirected().graph_attr("n", "12");
        b.add_node(attrs([("a", AttrValue::text("true")), ("b", AttrValue::text("x|y\\z"))]));
        b.add_node(attrs([("a", AttrValue::text("")), ("c", AttrValue::text("\"q"))]));
        b.add_node(attrs([("a", AttrValue::Real(1e-7)), ("b", AttrValue::text(" pad"))]));
        b.add_node(attrs([("a", AttrValue::text("1e5")), ("c", AttrValue::Int(-3))]));
        b.add_edge(0, 1, AttrMap::new());
        let g = b.build().unwrap();
        for spec in [FormatSpec::new(FMT), FormatSpec::compact(FMT)] {
            let s = render(&g, &spec).unwrap();
            assert!(s.contains("\"true\""));
            assert!(s.contains("x\\|y\\\\z"));
            assert_eq!(parse(&s).unwrap(), g, "{s}");
        }
    }

    #[test]
    fn parse_errors_name_lines() {
        let bad = "Directed: no\n\nNodes:\n\n| id |\n| --- |\n| 0 | 1 |\n\nEdges:\n\n| source | target |\n| --- | --- |\n";
        match parse(bad) {
            Err(TextError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(parse("Directed: maybe\n").is_err());
    }
}
