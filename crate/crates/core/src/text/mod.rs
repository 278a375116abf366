//! Graph textualization: the four exchange formats, the sectioned instruction
//! input and the answer text.

pub mod gml;
pub mod graphml;
pub mod markdown;
pub mod nodelink;
pub mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttrMap, AttrValue, AttributedGraph, EdgeRecord, GraphError, NodeRecord};
use crate::task::TaskInstance;
use templates::TemplatePack;

pub const DESCRIPTION_HEADER: &str = "# Graph Description";
pub const GRAPH_TEXT_HEADER: &str = "# Graph Text";
pub const QUERY_HEADER: &str = "# Query";
pub const ANSWER_HEADER: &str = "# Answer";
pub const ANSWER_MARKER: &str = "Answer:";

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot render {format}: {message}")]
    Render { format: FormatKind, message: String },
    #[error("{format} parse error at line {line}, column {column}: {message}")]
    Parse {
        format: FormatKind,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{format}: unsupported construct: {message}")]
    Unsupported { format: FormatKind, message: String },
    #[error("{format}: {message}")]
    Validation { format: FormatKind, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no template for task {0:?}")]
    MissingTemplate(String),
    #[error("template error: {0}")]
    Template(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatKind {
    Gml,
    Graphml,
    Json,
    Markdown,
}

impl FormatKind {
    pub const ALL: [FormatKind; 4] = [
        FormatKind::Gml,
        FormatKind::Graphml,
        FormatKind::Json,
        FormatKind::Markdown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormatKind::Gml => "gml",
            FormatKind::Graphml => "graphml",
            FormatKind::Json => "json",
            FormatKind::Markdown => "markdown",
        }
    }
}

impl fmt::Display for FormatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormatKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        FormatKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown format {s:?} (expected gml, graphml, json or markdown)"))
    }
}

/// A format plus rendering options. Attributes are written in lexicographic
/// name order, except that names listed in `attr_order` come first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatSpec {
    pub kind: FormatKind,
    #[serde(default)]
    pub compact: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attr_order: Vec<String>,
}

impl FormatSpec {
    pub fn new(kind: FormatKind) -> Self {
        FormatSpec {
            kind,
            compact: false,
            attr_order: Vec::new(),
        }
    }

    pub fn compact(kind: FormatKind) -> Self {
        FormatSpec {
            compact: true,
            ..FormatSpec::new(kind)
        }
    }

    fn rank(&self, name: &str) -> (usize, String) {
        let pos = self
            .attr_order
            .iter()
            .position(|n| n == name)
            .unwrap_or(self.attr_order.len());
        (pos, name.to_string())
    }

    /// Sorts attribute names per this spec.
    pub fn order_names<'a>(&self, names: impl IntoIterator<Item = &'a String>) -> Vec<&'a String> {
        let mut v: Vec<&String> = names.into_iter().collect();
        v.sort_by_cached_key(|n| self.rank(n));
        v.dedup();
        v
    }

    pub fn ordered<'a>(&self, attrs: &'a AttrMap) -> Vec<(&'a String, &'a AttrValue)> {
        self.order_names(attrs.keys())
            .into_iter()
            .map(|k| (k, &attrs[k]))
            .collect()
    }
}

pub fn render_graph_text(g: &AttributedGraph, fmt: &FormatSpec) -> Result<String, TextError> {
    match fmt.kind {
        FormatKind::Gml => gml::render(g, fmt),
        FormatKind::Graphml => graphml::render(g, fmt),
        FormatKind::Json => nodelink::render(g, fmt),
        FormatKind::Markdown => markdown::render(g, fmt),
    }
}

pub fn parse_graph_text(text: &str, fmt: &FormatSpec) -> Result<AttributedGraph, TextError> {
    match fmt.kind {
        FormatKind::Gml => gml::parse(text),
        FormatKind::Graphml => graphml::parse(text),
        FormatKind::Json => nodelink::parse(text),
        FormatKind::Markdown => markdown::parse(text),
    }
}

/// Collects parsed pieces into a graph. Node ids may appear in any order but
/// must form the set 0..n-1 without repeats.
pub(crate) fn assemble(
    format: FormatKind,
    directed: bool,
    graph_attrs: AttrMap,
    nodes: Vec<(i64, AttrMap)>,
    edges: Vec<(i64, i64, AttrMap)>,
) -> Result<AttributedGraph, TextError> {
    let n = nodes.len();
    let mut slots: Vec<Option<AttrMap>> = vec![None; n];
    for (id, attrs) in nodes {
        let invalid = |message: String| TextError::Validation { format, message };
        let idx = usize::try_from(id)
            .ok()
            .filter(|&i| i < n)
            .ok_or_else(|| invalid(format!("node id {id} outside 0..{n}")))?;
        if slots[idx].is_some() {
            return Err(invalid(format!("duplicate node id {id}")));
        }
        slots[idx] = Some(attrs);
    }
    let nodes = slots
        .into_iter()
        .enumerate()
        .map(|(id, a)| NodeRecord {
            id,
            attrs: a.expect("every slot filled: n distinct ids below n"),
        })
        .collect();
    let edges = edges
        .into_iter()
        .enumerate()
        .map(|(i, (s, t, attrs))| {
            let conv = |x: i64| {
                usize::try_from(x).map_err(|_| TextError::Validation {
                    format,
                    message: format!("edge {i} has negative endpoint {x}"),
                })
            };
            Ok(EdgeRecord {
                src: conv(s)?,
                dst: conv(t)?,
                attrs,
            })
        })
        .collect::<Result<Vec<_>, TextError>>()?;
    Ok(AttributedGraph::from_parts(directed, graph_attrs, nodes, edges)?)
}

pub(crate) fn check_reserved(
    format: FormatKind,
    attrs: &AttrMap,
    reserved: &[&str],
    owner: &str,
) -> Result<(), TextError> {
    for r in reserved {
        if attrs.contains_key(*r) {
            return Err(TextError::Render {
                format,
                message: format!("{owner} attribute name {r:?} collides with a structural key of the format; rename it"),
            });
        }
    }
    Ok(())
}

/// Line and column (1-based) of byte offset `pos` in `text`.
pub(crate) fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// The three input sections of one instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sections<'a> {
    pub description: &'a str,
    pub graph_text: &'a str,
    pub query: &'a str,
}

/// Assembles an instruction input from its sections.
pub fn compose_input(description: &str, graph_text: &str, query: &str) -> String {
    format!(
        "{DESCRIPTION_HEADER}\n{description}\n\n{GRAPH_TEXT_HEADER}\n{}\n\n{QUERY_HEADER}\n{query}\n",
        graph_text.trim_end_matches('\n')
    )
}

/// Splits an input into its sections, requiring each header exactly once and in order.
pub fn split_sections(input: &str) -> Option<Sections<'_>> {
    let mut found = Vec::new();
    let mut offset = 0;
    for line in input.split_inclusive('\n') {
        let trimmed = line.trim_end_matches('\n');
        if [DESCRIPTION_HEADER, GRAPH_TEXT_HEADER, QUERY_HEADER].contains(&trimmed) {
            found.push((trimmed, offset, offset + line.len()));
        }
        offset += line.len();
    }
    let [(h1, _, d0), (h2, g_head, g0), (h3, q_head, q0)] = found.as_slice() else {
        return None;
    };
    if (*h1, *h2, *h3) != (DESCRIPTION_HEADER, GRAPH_TEXT_HEADER, QUERY_HEADER) || !input.starts_with(DESCRIPTION_HEADER) {
        return None;
    }
    Some(Sections {
        description: input[*d0..*g_head].trim_end_matches('\n'),
        graph_text: input[*g0..*q_head].trim_end_matches('\n'),
        query: input[*q0..].trim_end_matches('\n'),
    })
}

/// Graph as it appears inside an instruction: graph-level attributes are
/// dropped since they hold bookkeeping (ego maps) or graph-level labels.
pub fn prompt_graph(g: &AttributedGraph) -> AttributedGraph {
    g.map_attrs(|_| AttrMap::new(), |_, a| a.clone(), |_, a| a.clone())
        .expect("dropping graph attributes keeps a graph valid")
}

/// Instruction input for `task` with its graph written in `fmt`.
pub fn lang_g(
    g: &AttributedGraph,
    task: &TaskInstance,
    fmt: &FormatSpec,
    pack: &TemplatePack,
) -> Result<String, TextError> {
    let key = task.task.template_key();
    let description = pack.render_description(&key, &task.bindings)?;
    let query = pack.render_query(&key, &task.bindings)?;
    let graph_text = render_graph_text(&prompt_graph(g), fmt)?;
    Ok(compose_input(&description, &graph_text, &query))
}

/// Answer text: a short rationale followed by the final `Answer:` line.
pub fn lang_y(task: &TaskInstance, pack: &TemplatePack) -> Result<String, TextError> {
    let mut bindings = task.bindings.clone();
    let canonical = task.answer.render();
    bindings.insert("answer".into(), canonical.clone());
    let rationale = pack.render_answer(&task.task.template_key(), &bindings)?;
    Ok(format!("{ANSWER_HEADER}\n{rationale}\n{ANSWER_MARKER} {canonical}"))
}

/// Tokenization rule used for token accounting.
pub trait Tokenizer {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Runs of alphanumeric characters are one token each; every other
/// non-whitespace character is a token of its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordPunct;

impl Tokenizer for WordPunct {
    fn name(&self) -> &str {
        "word-punct"
    }

    fn count(&self, text: &str) -> usize {
        let mut n = 0;
        let mut in_word = false;
        for c in text.chars() {
            if c.is_alphanumeric() || c == '_' {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }
}

pub fn count_tokens(text: &str) -> usize {
    WordPunct.count(text)
}

/// Per-format token counts of `g`.
pub fn format_token_counts(g: &AttributedGraph, compact: bool) -> Result<BTreeMap<FormatKind, usize>, TextError> {
    FormatKind::ALL
        .into_iter()
        .map(|k| {
            let spec = FormatSpec {
                compact,
                ..FormatSpec::new(k)
            };
            Ok((k, count_tokens(&render_graph_text(g, &spec)?)))
        })
        .collect()
}

pub(crate) fn names_of(maps: &[&AttrMap]) -> BTreeSet<String> {
    maps.iter().flat_map(|m| m.keys().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_counts() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("a b"), 2);
        assert_eq!(count_tokens("node [ id 0 ]"), 5);
        assert_eq!(count_tokens("\"x\": 1.5,"), 8);
    }

    #[test]
    fn sections_roundtrip() {
        let input = compose_input("desc", "graph [\n]\n", "How many?");
        let s = split_sections(&input).unwrap();
        assert_eq!(s.description, "desc");
        assert_eq!(s.graph_text, "graph [\n]");
        assert_eq!(s.query, "How many?");
        assert!(split_sections("# Query\nx\n").is_none());
        let doubled = format!("{input}# Query\nagain\n");
        assert!(split_sections(&doubled).is_none());
    }

    #[test]
    fn attr_order_puts_listed_first() {
        let spec = FormatSpec {
            attr_order: vec!["z".into()],
            ..FormatSpec::new(FormatKind::Json)
        };
        let names = ["a".to_string(), "z".to_string(), "b".to_string()];
        let got: Vec<&str> = spec.order_names(names.iter()).into_iter().map(|s| s.as_str()).collect();
        assert_eq!(got, ["z", "a", "b"]);
    }
}
