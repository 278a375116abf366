//! GraphML.
//!
//! One `<key>` is declared per (domain, attribute name, value kind), with ids
//! `d0`, `d1`, ... in domain order graph, node, edge. `attr.type` is `string`,
//! `long`, `double` or `boolean`. Node ids are the decimal node indices.
//! Parsing is fail-closed: a document that ends before `</graphml>` is an error.

use std::collections::BTreeMap;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{assemble, line_col, FormatKind, FormatSpec, TextError};
use crate::graph::{AttrMap, AttrValue, AttributedGraph};
use crate::numfmt;

const FMT: FormatKind = FormatKind::Graphml;
const NS: &str = "http://graphml.graphdrawing.org/xmlns";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Domain {
    Graph,
    Node,
    Edge,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Graph => "graph",
            Domain::Node => "node",
            Domain::Edge => "edge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    String,
    Long,
    Double,
    Boolean,
}

impl Kind {
    fn of(v: &AttrValue) -> Kind {
        match v {
            AttrValue::Text(_) => Kind::String,
            AttrValue::Int(_) => Kind::Long,
            AttrValue::Real(_) => Kind::Double,
            AttrValue::Bool(_) => Kind::Boolean,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::String => "string",
            Kind::Long => "long",
            Kind::Double => "double",
            Kind::Boolean => "boolean",
        }
    }

    fn parse_name(s: &str) -> Option<Kind> {
        Some(match s {
            "string" => Kind::String,
            "int" | "long" => Kind::Long,
            "float" | "double" => Kind::Double,
            "boolean" => Kind::Boolean,
            _ => return None,
        })
    }

    fn value(self, raw: &str) -> Option<AttrValue> {
        Some(match self {
            Kind::String => AttrValue::Text(raw.to_string()),
            Kind::Long => AttrValue::Int(raw.trim().parse().ok()?),
            Kind::Double => AttrValue::Real(raw.trim().parse::<f64>().ok().filter(|r| r.is_finite())?),
            Kind::Boolean => match raw.trim() {
                "true" => AttrValue::Bool(true),
                "false" => AttrValue::Bool(false),
                _ => return None,
            },
        })
    }
}

fn value_text(v: &AttrValue) -> String {
    match v {
        AttrValue::Text(s) => escape(s.as_str()).into_owned(),
        AttrValue::Int(i) => i.to_string(),
        AttrValue::Real(r) => numfmt::real(*r),
        AttrValue::Bool(b) => b.to_string(),
    }
}

struct Out<'a> {
    s: String,
    spec: &'a FormatSpec,
}

impl Out<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        if !self.spec.compact {
            for _ in 0..depth {
                self.s.push_str("  ");
            }
        }
        self.s.push_str(text);
        if !self.spec.compact {
            self.s.push('\n');
        }
    }

    fn data(
        &mut self,
        depth: usize,
        domain: Domain,
        attrs: &AttrMap,
        keys: &BTreeMap<(Domain, String, Kind), String>,
    ) {
        for (name, v) in self.spec.ordered(attrs) {
            let id = &keys[&(domain, name.clone(), Kind::of(v))];
            self.line(depth, &format!("<data key=\"{id}\">{}</data>", value_text(v)));
        }
    }
}

pub fn render(g: &AttributedGraph, spec: &FormatSpec) -> Result<String, TextError> {
    let mut decls: Vec<(Domain, &String, Kind)> = Vec::new();
    let maps = std::iter::once((Domain::Graph, g.graph_attrs()))
        .chain(g.nodes().iter().map(|n| (Domain::Node, &n.attrs)))
        .chain(g.edges().iter().map(|e| (Domain::Edge, &e.attrs)));
    for (domain, attrs) in maps {
        for (k, v) in attrs {
            decls.push((domain, k, Kind::of(v)));
        }
    }
    decls.sort_by_cached_key(|(d, name, kind)| (*d, spec.rank(name), *kind));
    decls.dedup();
    let mut keys = BTreeMap::new();
    let mut out = Out {
        s: String::new(),
        spec,
    };
    out.line(0, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    out.line(0, &format!("<graphml xmlns=\"{NS}\">"));
    for (i, (domain, name, kind)) in decls.iter().enumerate() {
        let id = format!("d{i}");
        out.line(
            1,
            &format!(
                "<key id=\"{id}\" for=\"{}\" attr.name=\"{}\" attr.type=\"{}\"/>",
                domain.name(),
                escape(name.as_str()),
                kind.name()
            ),
        );
        keys.insert((*domain, name.to_string(), *kind), id);
    }
    let edgedefault = if g.directed() { "directed" } else { "undirected" };
    out.line(1, &format!("<graph edgedefault=\"{edgedefault}\">"));
    out.data(2, Domain::Graph, g.graph_attrs(), &keys);
    for n in g.nodes() {
        if n.attrs.is_empty() {
            out.line(2, &format!("<node id=\"{}\"/>", n.id));
        } else {
            out.line(2, &format!("<node id=\"{}\">", n.id));
            out.data(3, Domain::Node, &n.attrs, &keys);
            out.line(2, "</node>");
        }
    }
    for e in g.edges() {
        let open = format!("<edge source=\"{}\" target=\"{}\"", e.src, e.dst);
        if e.attrs.is_empty() {
            out.line(2, &format!("{open}/>"));
        } else {
            out.line(2, &format!("{open}>"));
            out.data(3, Domain::Edge, &e.attrs, &keys);
            out.line(2, "</edge>");
        }
    }
    out.line(1, "</graph>");
    out.line(0, "</graphml>");
    if spec.compact {
        out.s.push('\n');
    }
    Ok(out.s)
}

struct Elem {
    name: String,
    attrs: Vec<(String, String)>,
    empty: bool,
    pos: usize,
}

impl Elem {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

struct Xml<'a> {
    r: Reader<&'a [u8]>,
    text: &'a str,
}

impl<'a> Xml<'a> {
    fn err_at(&self, pos: usize, message: impl Into<String>) -> TextError {
        let (line, column) = line_col(self.text, pos);
        TextError::Parse {
            format: FMT,
            line,
            column,
            message: message.into(),
        }
    }

    fn unsupported(&self, e: &Elem, what: &str) -> TextError {
        let (line, column) = line_col(self.text, e.pos);
        TextError::Unsupported {
            format: FMT,
            message: format!("{what} <{}> at line {line}, column {column}", e.name),
        }
    }

    fn elem(&self, e: &BytesStart<'_>, empty: bool, pos: usize) -> Result<Elem, TextError> {
        let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
        let mut attrs = Vec::new();
        for a in e.attributes() {
            let a = a.map_err(|err| self.err_at(pos, err.to_string()))?;
            let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            let value = a
                .unescape_value()
                .map_err(|err| self.err_at(pos, err.to_string()))?
                .into_owned();
            attrs.push((key, value));
        }
        Ok(Elem {
            name,
            attrs,
            empty,
            pos,
        })
    }

    /// Next child element of the current element, or `None` at its end tag.
    fn child(&mut self) -> Result<Option<Elem>, TextError> {
        loop {
            let pos = self.r.buffer_position() as usize;
            let ev = self
                .r
                .read_event()
                .map_err(|e| self.err_at(self.r.error_position() as usize, e.to_string()))?;
            match ev {
                Event::Start(e) => return self.elem(&e, false, pos).map(Some),
                Event::Empty(e) => return self.elem(&e, true, pos).map(Some),
                Event::End(_) => return Ok(None),
                Event::Text(t) => {
                    let raw = t.unescape().map_err(|e| self.err_at(pos, e.to_string()))?;
                    if !raw.trim().is_empty() {
                        return Err(self.err_at(pos, "unexpected text content"));
                    }
                }
                Event::CData(_) => return Err(self.err_at(pos, "unexpected CDATA")),
                Event::Eof => return Err(self.err_at(self.text.len(), "document ends before its closing tags")),
                Event::Comment(_) | Event::Decl(_) | Event::PI(_) | Event::DocType(_) => {}
            }
        }
    }

    /// Text content up to the end tag of the current element.
    fn content(&mut self, e: &Elem) -> Result<String, TextError> {
        let mut s = String::new();
        if e.empty {
            return Ok(s);
        }
        loop {
            let pos = self.r.buffer_position() as usize;
            let ev = self
                .r
                .read_event()
                .map_err(|err| self.err_at(self.r.error_position() as usize, err.to_string()))?;
            match ev {
                Event::Text(t) => s.push_str(&t.unescape().map_err(|err| self.err_at(pos, err.to_string()))?),
                Event::CData(c) => s.push_str(&String::from_utf8_lossy(&c)),
                Event::End(_) => return Ok(s),
                Event::Comment(_) | Event::PI(_) => {}
                Event::Eof => return Err(self.err_at(self.text.len(), "document ends inside <data>")),
                _ => return Err(self.err_at(pos, "<data> must contain only text")),
            }
        }
    }

    fn skip(&mut self, e: &Elem) -> Result<(), TextError> {
        if e.empty {
            return Ok(());
        }
        let mut depth = 1;
        while depth > 0 {
            match self
                .r
                .read_event()
                .map_err(|err| self.err_at(self.r.error_position() as usize, err.to_string()))?
            {
                Event::Start(_) => depth += 1,
                Event::End(_) => depth -= 1,
                Event::Eof => return Err(self.err_at(self.text.len(), "document ends inside an element")),
                _ => {}
            }
        }
        Ok(())
    }
}

type KeyTable = BTreeMap<String, (Domain, String, Kind)>;

fn read_data(x: &mut Xml<'_>, parent: &Elem, domain: Domain, keys: &KeyTable) -> Result<AttrMap, TextError> {
    let mut attrs = AttrMap::new();
    if parent.empty {
        return Ok(attrs);
    }
    while let Some(c) = x.child()? {
        match c.name.as_str() {
            "data" => {
                let key = c.attr("key").ok_or_else(|| x.err_at(c.pos, "<data> without key"))?.to_string();
                let raw = x.content(&c)?;
                let (d, name, kind) = keys
                    .get(&key)
                    .ok_or_else(|| x.err_at(c.pos, format!("undeclared key {key:?}")))?;
                if *d != domain {
                    return Err(x.err_at(c.pos, format!("key {key:?} is declared for {}", d.name())));
                }
                let v = kind.value(&raw).ok_or_else(|| {
                    x.err_at(c.pos, format!("value {raw:?} is not a valid {}", kind.name()))
                })?;
                if attrs.insert(name.clone(), v).is_some() {
                    return Err(x.err_at(c.pos, format!("attribute {name:?} given twice")));
                }
            }
            "desc" => x.skip(&c)?,
            _ => return Err(x.unsupported(&c, &format!("element inside <{}>", parent.name))),
        }
    }
    Ok(attrs)
}

fn parse_id(x: &Xml<'_>, e: &Elem, attr: &str) -> Result<i64, TextError> {
    let raw = e
        .attr(attr)
        .ok_or_else(|| x.err_at(e.pos, format!("<{}> without {attr}", e.name)))?;
    raw.parse::<i64>().map_err(|_| TextError::Unsupported {
        format: FMT,
        message: format!("non-integer node id {raw:?}"),
    })
}

pub fn parse(text: &str) -> Result<AttributedGraph, TextError> {
    let mut x = Xml {
        r: Reader::from_str(text),
        text,
    };
    let root = x.child().map_err(|e| match e {
        TextError::Parse { line, column, .. } if text.trim().is_empty() => TextError::Parse {
            format: FMT,
            line,
            column,
            message: "empty document".into(),
        },
        other => other,
    })?;
    let root = root.ok_or_else(|| x.err_at(0, "expected <graphml>"))?;
    if root.name != "graphml" || root.empty {
        return Err(x.err_at(root.pos, "root element must be a non-empty <graphml>"));
    }
    let mut keys = KeyTable::new();
    let mut graph = None;
    while let Some(c) = x.child()? {
        match c.name.as_str() {
            "key" => {
                let get = |k: &str| c.attr(k).ok_or_else(|| x.err_at(c.pos, format!("<key> without {k}")));
                let id = get("id")?.to_string();
                let domain = match get("for")? {
                    "graph" => Domain::Graph,
                    "node" => Domain::Node,
                    "edge" => Domain::Edge,
                    other => {
                        return Err(TextError::Unsupported {
                            format: FMT,
                            message: format!("key domain {other:?}"),
                        })
                    }
                };
                let name = get("attr.name")?.to_string();
                let kind = Kind::parse_name(c.attr("attr.type").unwrap_or("string")).ok_or_else(|| {
                    TextError::Unsupported {
                        format: FMT,
                        message: format!("attr.type {:?}", c.attr("attr.type").unwrap_or_default()),
                    }
                })?;
                if !c.empty {
                    while let Some(k) = x.child()? {
                        match k.name.as_str() {
                            "desc" => x.skip(&k)?,
                            _ => return Err(x.unsupported(&k, "element inside <key>")),
                        }
                    }
                }
                if keys.insert(id.clone(), (domain, name, kind)).is_some() {
                    return Err(x.err_at(c.pos, format!("duplicate key id {id:?}")));
                }
            }
            "graph" => {
                if graph.is_some() {
                    return Err(x.unsupported(&c, "second"));
                }
                graph = Some(read_graph(&mut x, &c, &keys)?);
            }
            "desc" => x.skip(&c)?,
            _ => return Err(x.unsupported(&c, "element")),
        }
    }
    // anything after </graphml> other than whitespace or comments is rejected
    loop {
        let pos = x.r.buffer_position() as usize;
        match x.r.read_event().map_err(|e| x.err_at(pos, e.to_string()))? {
            Event::Eof => break,
            Event::Text(t) if t.iter().all(|b| b.is_ascii_whitespace()) => {}
            Event::Comment(_) => {}
            _ => return Err(x.err_at(pos, "content after </graphml>")),
        }
    }
    let (directed, graph_attrs, nodes, edges) =
        graph.ok_or_else(|| x.err_at(text.len(), "document has no <graph>"))?;
    assemble(FMT, directed, graph_attrs, nodes, edges)
}

type Parts = (bool, AttrMap, Vec<(i64, AttrMap)>, Vec<(i64, i64, AttrMap)>);

fn read_graph(x: &mut Xml<'_>, g: &Elem, keys: &KeyTable) -> Result<Parts, TextError> {
    let directed = match g.attr("edgedefault") {
        Some("directed") => true,
        Some("undirected") | None => false,
        Some(other) => return Err(x.err_at(g.pos, format!("invalid edgedefault {other:?}"))),
    };
    let mut graph_attrs = AttrMap::new();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    if g.empty {
        return Ok((directed, graph_attrs, nodes, edges));
    }
    while let Some(c) = x.child()? {
        match c.name.as_str() {
            "data" => {
                let key = c.attr("key").ok_or_else(|| x.err_at(c.pos, "<data> without key"))?.to_string();
                let raw = x.content(&c)?;
                let (d, name, kind) = keys
                    .get(&key)
                    .ok_or_else(|| x.err_at(c.pos, format!("undeclared key {key:?}")))?;
                if *d != Domain::Graph {
                    return Err(x.err_at(c.pos, format!("key {key:?} is declared for {}", d.name())));
                }
                let v = kind
                    .value(&raw)
                    .ok_or_else(|| x.err_at(c.pos, format!("value {raw:?} is not a valid {}", kind.name())))?;
                if graph_attrs.insert(name.clone(), v).is_some() {
                    return Err(x.err_at(c.pos, format!("attribute {name:?} given twice")));
                }
            }
            "node" => {
                let id = parse_id(x, &c, "id")?;
                let attrs = read_data(x, &c, Domain::Node, keys)?;
                nodes.push((id, attrs));
            }
            "edge" => {
                if c.attr("directed").is_some() {
                    return Err(x.unsupported(&c, "per-edge directedness on"));
                }
                let s = parse_id(x, &c, "source")?;
                let t = parse_id(x, &c, "target")?;
                let attrs = read_data(x, &c, Domain::Edge, keys)?;
                edges.push((s, t, attrs));
            }
            "desc" => x.skip(&c)?,
            _ => return Err(x.unsupported(&c, "element")),
        }
    }
    Ok((directed, graph_attrs, nodes, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{attrs, from_edges, GraphBuilder};

    fn sample() -> AttributedGraph {
        let mut b = GraphBuilder::undirected().graph_attr("title", "a <b> & c");
        b.add_node(attrs([("x", AttrValue::Int(1)), ("t", AttrValue::text(" pad "))]));
        b.add_node(attrs([("x", AttrValue::text("one"))]));
        b.add_node(AttrMap::new());
        b.add_edge(0, 1, attrs([("w", AttrValue::Real(0.25)), ("ok", AttrValue::Bool(true))]));
        b.add_edge(1, 2, attrs([("e", AttrValue::text(""))]));
        b.build().unwrap()
    }

    #[test]
    fn roundtrip_pretty_and_compact() {
        let g = sample();
        for spec in [FormatSpec::new(FMT), FormatSpec::compact(FMT)] {
            let s = render(&g, &spec).unwrap();
            assert_eq!(parse(&s).unwrap(), g, "{s}");
        }
    }

    #[test]
    fn same_name_different_kinds_get_separate_keys() {
        let s = render(&sample(), &FormatSpec::new(FMT)).unwrap();
        assert!(s.contains("for=\"node\" attr.name=\"x\" attr.type=\"string\""));
        assert!(s.contains("for=\"node\" attr.name=\"x\" attr.type=\"long\""));
    }

    #[test]
    fn truncated_is_an_error() {
        let s = render(&from_edges(3, true, &[(0, 1), (1, 2)]).unwrap(), &FormatSpec::new(FMT)).unwrap();
        for cut in [s.len() - 12, s.len() / 2, 10] {
            assert!(parse(&s[..cut]).is_err(), "cut at {cut}");
        }
        assert!(parse("").is_err());
    }

    #[test]
    fn unsupported_constructs() {
        let doc = r#"<graphml><graph><node id="0"><graph/></node></graph></graphml>"#;
        assert!(matches!(parse(doc), Err(TextError::Unsupported { .. })));
        let doc = r#"<graphml><graph><hyperedge/></graph></graphml>"#;
        assert!(matches!(parse(doc), Err(TextError::Unsupported { .. })));
    }
}
