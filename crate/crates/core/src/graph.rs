//! Attributed graph model shared by every stage of the pipeline.
//!
//! Graphs are built through [`GraphBuilder`] (or [`AttributedGraph::from_parts`]),
//! validated once, and are immutable afterwards. Node ids are always the
//! contiguous integers `0..n`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numfmt;

/// Graph-level flag permitting parallel edges.
pub const MULTIGRAPH_FLAG: &str = "multigraph";
/// Graph-level flag permitting self-loops.
pub const SELF_LOOPS_FLAG: &str = "allow_self_loops";
/// Graph-level attribute written by [`AttributedGraph::ego_graph`]: original ids in new-id order.
pub const EGO_SOURCE_IDS: &str = "ego_source_ids";

pub type NodeId = usize;
pub type AttrMap = BTreeMap<String, AttrValue>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid node {index}: {message}")]
    InvalidNode { index: usize, message: String },
    #[error("invalid edge {index}: {message}")]
    InvalidEdge { index: usize, message: String },
    #[error("invalid attribute `{name}`: {message}")]
    InvalidAttr { name: String, message: String },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge index {0}")]
    UnknownEdge(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A typed attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Text(String),
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl AttrValue {
    pub fn text(s: impl Into<String>) -> Self {
        AttrValue::Text(s.into())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AttrValue::Text(_) => "text",
            AttrValue::Int(_) => "integer",
            AttrValue::Real(_) => "real",
            AttrValue::Bool(_) => "boolean",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Int(i) => Some(*i as f64),
            AttrValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            AttrValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), GraphError> {
        match self {
            AttrValue::Real(r) if !r.is_finite() => Err(GraphError::InvalidAttr {
                name: name.to_string(),
                message: format!("real value {r} is not finite"),
            }),
            AttrValue::Text(s) if s.chars().any(char::is_control) => Err(GraphError::InvalidAttr {
                name: name.to_string(),
                message: "text contains control characters".into(),
            }),
            _ => Ok(()),
        }
    }

    pub(crate) fn to_json(&self) -> serde_json::Value {
        match self {
            AttrValue::Text(s) => serde_json::Value::String(s.clone()),
            AttrValue::Int(i) => serde_json::Value::from(*i),
            AttrValue::Real(r) => serde_json::Number::from_f64(*r)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            AttrValue::Bool(b) => serde_json::Value::Bool(*b),
        }
    }

    pub(crate) fn from_json(v: &serde_json::Value) -> Option<Self> {
        match v {
            serde_json::Value::String(s) => Some(AttrValue::Text(s.clone())),
            serde_json::Value::Bool(b) => Some(AttrValue::Bool(*b)),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Some(AttrValue::Int(i))
                } else if n.is_u64() {
                    None
                } else {
                    n.as_f64().map(AttrValue::Real)
                }
            }
            _ => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Text(s) => f.write_str(s),
            AttrValue::Int(i) => write!(f, "{i}"),
            AttrValue::Real(r) => f.write_str(&numfmt::real(*r)),
            AttrValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for AttrValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AttrValue::Text(t) => s.serialize_str(t),
            AttrValue::Int(i) => s.serialize_i64(*i),
            AttrValue::Real(r) => s.serialize_f64(*r),
            AttrValue::Bool(b) => s.serialize_bool(*b),
        }
    }
}

impl<'de> Deserialize<'de> for AttrValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        AttrValue::from_json(&v).ok_or_else(|| {
            serde::de::Error::custom(format!(
                "attribute values must be strings, 64-bit integers, finite reals or booleans, got {v}"
            ))
        })
    }
}

impl From<&str> for AttrValue {
    fn from(s: &str) -> Self {
        AttrValue::Text(s.to_string())
    }
}
impl From<String> for AttrValue {
    fn from(s: String) -> Self {
        AttrValue::Text(s)
    }
}
impl From<i64> for AttrValue {
    fn from(i: i64) -> Self {
        AttrValue::Int(i)
    }
}
impl From<f64> for AttrValue {
    fn from(r: f64) -> Self {
        AttrValue::Real(r)
    }
}
impl From<bool> for AttrValue {
    fn from(b: bool) -> Self {
        AttrValue::Bool(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    #[serde(default)]
    pub attrs: AttrMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: NodeId,
    pub dst: NodeId,
    #[serde(default)]
    pub attrs: AttrMap,
}

impl EdgeRecord {
    /// Numeric `weight` attribute; a masked or textual weight reads as `None`.
    pub fn weight(&self) -> Option<f64> {
        self.attrs.get("weight").and_then(AttrValue::as_f64)
    }

    /// The endpoint opposite `v`, if `v` is an endpoint.
    pub fn other(&self, v: NodeId) -> Option<NodeId> {
        if self.src == v {
            Some(self.dst)
        } else if self.dst == v {
            Some(self.src)
        } else {
            None
        }
    }
}

/// Which incident edges a neighbourhood query follows in a directed graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

/// Center of an ego-graph: a node, an edge given by its index, or a node pair
/// that need not be adjacent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoCenter {
    Node(NodeId),
    Edge(usize),
    Pair(NodeId, NodeId),
}

#[derive(Clone)]
pub struct AttributedGraph {
    directed: bool,
    graph_attrs: AttrMap,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    // incident edge indices, per node
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

impl PartialEq for AttributedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.directed == other.directed
            && self.graph_attrs == other.graph_attrs
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

impl fmt::Debug for AttributedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AttributedGraph")
            .field("directed", &self.directed)
            .field("graph_attrs", &self.graph_attrs)
            .field("nodes", &self.nodes)
            .field("edges", &self.edges)
            .finish()
    }
}

/// On-disk layout of the canonical graph file.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    directed: bool,
    #[serde(default)]
    graph: AttrMap,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

impl AttributedGraph {
    /// Validates the parts and builds the graph.
    pub fn from_parts(
        directed: bool,
        graph_attrs: AttrMap,
        nodes: Vec<NodeRecord>,
        edges: Vec<EdgeRecord>,
    ) -> Result<Self, GraphError> {
        for (name, value) in &graph_attrs {
            check_attr(name, value)?;
        }
        for (index, node) in nodes.iter().enumerate() {
            if node.id != index {
                return Err(GraphError::InvalidNode {
                    index,
                    message: format!("expected id {index}, found {}", node.id),
                });
            }
            for (name, value) in &node.attrs {
                check_attr(name, value).map_err(|e| GraphError::InvalidNode {
                    index,
                    message: e.to_string(),
                })?;
            }
        }
        let multigraph = flag(&graph_attrs, MULTIGRAPH_FLAG);
        let self_loops = flag(&graph_attrs, SELF_LOOPS_FLAG);
        let n = nodes.len();
        let mut seen = BTreeSet::new();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (index, e) in edges.iter().enumerate() {
            let bad = |message: String| GraphError::InvalidEdge { index, message };
            if e.src >= n || e.dst >= n {
                return Err(bad(format!(
                    "endpoint ({}, {}) references a node outside 0..{n}",
                    e.src, e.dst
                )));
            }
            if e.src == e.dst && !self_loops {
                return Err(bad(format!("self-loop on node {}", e.src)));
            }
            let key = if directed {
                (e.src, e.dst)
            } else {
                (e.src.min(e.dst), e.src.max(e.dst))
            };
            if !multigraph && !seen.insert(key) {
                return Err(bad(format!("parallel edge ({}, {})", e.src, e.dst)));
            }
            for (name, value) in &e.attrs {
                check_attr(name, value).map_err(|err| bad(err.to_string()))?;
            }
            out_edges[e.src].push(index);
            in_edges[e.dst].push(index);
        }
        Ok(AttributedGraph {
            directed,
            graph_attrs,
            nodes,
            edges,
            out_edges,
            in_edges,
        })
    }

    pub fn empty(directed: bool) -> Self {
        Self::from_parts(directed, AttrMap::new(), Vec::new(), Vec::new())
            .expect("empty graph is valid")
    }

    pub fn directed(&self) -> bool {
        self.directed
    }
    pub fn graph_attrs(&self) -> &AttrMap {
        &self.graph_attrs
    }
    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }
    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
    pub fn is_multigraph(&self) -> bool {
        flag(&self.graph_attrs, MULTIGRAPH_FLAG)
    }

    pub fn node(&self, v: NodeId) -> Result<&NodeRecord, GraphError> {
        self.nodes.get(v).ok_or(GraphError::UnknownNode(v))
    }

    pub fn edge(&self, index: usize) -> Result<&EdgeRecord, GraphError> {
        self.edges.get(index).ok_or(GraphError::UnknownEdge(index))
    }

    /// Index of the first edge joining `u` and `v` (respecting direction in directed graphs).
    pub fn find_edge(&self, u: NodeId, v: NodeId) -> Option<usize> {
        let candidates = self.out_edges.get(u)?;
        let forward = candidates.iter().copied().find(|&i| self.edges[i].dst == v);
        if forward.is_some() || self.directed {
            return forward;
        }
        self.in_edges[u]
            .iter()
            .copied()
            .find(|&i| self.edges[i].src == v)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.find_edge(u, v).is_some()
    }

    /// Indices of edges incident to `v` (each edge once, self-loops included once).
    pub fn incident_edges(&self, v: NodeId) -> Result<Vec<usize>, GraphError> {
        self.node(v)?;
        let mut all: Vec<usize> = self.out_edges[v]
            .iter()
            .chain(self.in_edges[v].iter())
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        Ok(all)
    }

    /// Number of incident edge endpoints; in directed graphs this is in-degree plus out-degree.
    pub fn degree(&self, v: NodeId) -> Result<usize, GraphError> {
        self.node(v)?;
        Ok(self.out_edges[v].len() + self.in_edges[v].len())
    }

    pub fn out_degree(&self, v: NodeId) -> Result<usize, GraphError> {
        self.node(v)?;
        Ok(self.out_edges[v].len())
    }

    pub fn in_degree(&self, v: NodeId) -> Result<usize, GraphError> {
        self.node(v)?;
        Ok(self.in_edges[v].len())
    }

    pub fn neighbors(&self, v: NodeId) -> Result<BTreeSet<NodeId>, GraphError> {
        self.neighbors_directed(v, Direction::Both)
    }

    pub fn neighbors_directed(
        &self,
        v: NodeId,
        dir: Direction,
    ) -> Result<BTreeSet<NodeId>, GraphError> {
        self.node(v)?;
        let mut out = BTreeSet::new();
        let follow_out = !self.directed || matches!(dir, Direction::Out | Direction::Both);
        let follow_in = !self.directed || matches!(dir, Direction::In | Direction::Both);
        if follow_out {
            out.extend(self.out_edges[v].iter().map(|&i| self.edges[i].dst));
        }
        if follow_in {
            out.extend(self.in_edges[v].iter().map(|&i| self.edges[i].src));
        }
        Ok(out)
    }

    /// Undirected adjacency lists (sorted, deduplicated), ignoring edge direction.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        (0..self.node_count())
            .map(|v| {
                self.neighbors_directed(v, Direction::Both)
                    .expect("node exists")
                    .into_iter()
                    .collect()
            })
            .collect()
    }

    /// Induced subgraph on every node within `radius` hops of the center, edges
    /// traversed in either direction. New ids follow increasing original id; the
    /// original ids are recorded under [`EGO_SOURCE_IDS`].
    pub fn ego_graph(&self, center: EgoCenter, radius: usize) -> Result<AttributedGraph, GraphError> {
        let seeds = match center {
            EgoCenter::Node(v) => {
                self.node(v)?;
                vec![v]
            }
            EgoCenter::Edge(i) => {
                let e = self.edge(i)?;
                vec![e.src, e.dst]
            }
            EgoCenter::Pair(u, v) => {
                self.node(u)?;
                self.node(v)?;
                vec![u, v]
            }
        };
        let mut dist = vec![usize::MAX; self.node_count()];
        let mut queue = VecDeque::new();
        for s in seeds {
            if dist[s] == usize::MAX {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        let adj = self.adjacency();
        while let Some(u) = queue.pop_front() {
            if dist[u] == radius {
                continue;
            }
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        let keep: Vec<NodeId> = (0..self.node_count())
            .filter(|&v| dist[v] != usize::MAX)
            .collect();
        let mut graph_attrs = self.graph_attrs.clone();
        let ids: Vec<String> = keep.iter().map(|v| v.to_string()).collect();
        graph_attrs.insert(EGO_SOURCE_IDS.into(), AttrValue::Text(ids.join(",")));
        Ok(self.induced(&keep, graph_attrs))
    }

    /// Induced subgraph on `keep` (sorted original ids), relabelled to `0..keep.len()`.
    pub fn induced(&self, keep: &[NodeId], graph_attrs: AttrMap) -> AttributedGraph {
        let mut remap = vec![usize::MAX; self.node_count()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let nodes = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| NodeRecord {
                id: new,
                attrs: self.nodes[old].attrs.clone(),
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| remap[e.src] != usize::MAX && remap[e.dst] != usize::MAX)
            .map(|e| EdgeRecord {
                src: remap[e.src],
                dst: remap[e.dst],
                attrs: e.attrs.clone(),
            })
            .collect();
        AttributedGraph::from_parts(self.directed, graph_attrs, nodes, edges)
            .expect("induced subgraph of a valid graph is valid")
    }

    /// Same graph with edges removed by index.
    pub fn without_edges(&self, removed: &BTreeSet<usize>) -> AttributedGraph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, e)| e.clone())
            .collect();
        AttributedGraph::from_parts(self.directed, self.graph_attrs.clone(), self.nodes.clone(), edges)
            .expect("removing edges keeps a graph valid")
    }

    /// Rebuilds the graph with transformed attribute maps; topology unchanged.
    pub fn map_attrs(
        &self,
        graph: impl FnOnce(&AttrMap) -> AttrMap,
        mut node: impl FnMut(NodeId, &AttrMap) -> AttrMap,
        mut edge: impl FnMut(usize, &AttrMap) -> AttrMap,
    ) -> Result<AttributedGraph, GraphError> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeRecord {
                id: n.id,
                attrs: node(n.id, &n.attrs),
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeRecord {
                src: e.src,
                dst: e.dst,
                attrs: edge(i, &e.attrs),
            })
            .collect();
        AttributedGraph::from_parts(self.directed, graph(&self.graph_attrs), nodes, edges)
    }

    pub fn to_json_string(&self, pretty: bool) -> String {
        let file = GraphFile {
            directed: self.directed,
            graph: self.graph_attrs.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        };
        let mut s = if pretty {
            serde_json::to_string_pretty(&file)
        } else {
            serde_json::to_string(&file)
        }
        .expect("graph serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_parts(file.directed, file.graph, file.nodes, file.edges)
    }
}

impl Serialize for AttributedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphFile {
            directed: self.directed,
            graph: self.graph_attrs.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AttributedGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let file = GraphFile::deserialize(d)?;
        Self::from_parts(file.directed, file.graph, file.nodes, file.edges)
            .map_err(serde::de::Error::custom)
    }
}

fn flag(attrs: &AttrMap, name: &str) -> bool {
    matches!(attrs.get(name), Some(AttrValue::Bool(true)))
}

fn check_attr(name: &str, value: &AttrValue) -> Result<(), GraphError> {
    if name.is_empty() {
        return Err(GraphError::InvalidAttr {
            name: name.into(),
            message: "attribute names must be nonempty".into(),
        });
    }
    value.validate(name)
}

/// Reads a canonical graph file.
pub fn load_graph(path: impl AsRef<Path>) -> Result<AttributedGraph, GraphError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    AttributedGraph::from_json_str(&text)
}

/// Writes a canonical graph file (pretty layout, trailing newline).
pub fn save_graph(g: &AttributedGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = path.as_ref();
    fs::write(path, g.to_json_string(true)).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Incremental construction helper.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    directed: bool,
    graph_attrs: AttrMap,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

impl GraphBuilder {
    pub fn new(directed: bool) -> Self {
        GraphBuilder {
            directed,
            ..Default::default()
        }
    }

    pub fn undirected() -> Self {
        Self::new(false)
    }

    pub fn graph_attr(mut self, name: &str, value: impl Into<AttrValue>) -> Self {
        self.graph_attrs.insert(name.into(), value.into());
        self
    }

    pub fn add_node(&mut self, attrs: AttrMap) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(NodeRecord { id, attrs });
        id
    }

    pub fn add_nodes(&mut self, count: usize) -> &mut Self {
        for _ in 0..count {
            self.add_node(AttrMap::new());
        }
        self
    }

    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, attrs: AttrMap) -> &mut Self {
        self.edges.push(EdgeRecord { src, dst, attrs });
        self
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn build(self) -> Result<AttributedGraph, GraphError> {
        AttributedGraph::from_parts(self.directed, self.graph_attrs, self.nodes, self.edges)
    }
}

/// Convenience: builds an attribute map from pairs.
pub fn attrs<I, K, V>(pairs: I) -> AttrMap
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<AttrValue>,
{
    pairs
        .into_iter()
        .map(|(k, v)| (k.into(), v.into()))
        .collect()
}

/// Unattributed graph from an edge list.
pub fn from_edges(n: usize, directed: bool, edges: &[(NodeId, NodeId)]) -> Result<AttributedGraph, GraphError> {
    let mut b = GraphBuilder::new(directed);
    b.add_nodes(n);
    for &(u, v) in edges {
        b.add_edge(u, v, AttrMap::new());
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> AttributedGraph {
        from_edges(4, false, &[(0, 1), (0, 2), (0, 3)]).unwrap()
    }

    #[test]
    fn star_center_degree() {
        let g = star();
        assert_eq!(g.degree(0).unwrap(), 3);
        assert_eq!(g.degree(1).unwrap(), 1);
    }

    #[test]
    fn isolated_node() {
        let g = from_edges(3, false, &[(0, 1)]).unwrap();
        assert_eq!(g.degree(2).unwrap(), 0);
        assert!(g.neighbors(2).unwrap().is_empty());
    }

    #[test]
    fn path_neighbors() {
        let g = from_edges(3, false, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.neighbors(1).unwrap(), BTreeSet::from([0, 2]));
    }

    #[test]
    fn unknown_node_lookup() {
        let g = star();
        assert!(matches!(g.degree(9), Err(GraphError::UnknownNode(9))));
        assert!(g.neighbors(4).is_err());
        assert!(g.ego_graph(EgoCenter::Node(7), 1).is_err());
    }

    #[test]
    fn directed_total_degree_and_direction() {
        let g = from_edges(3, true, &[(0, 1), (2, 0)]).unwrap();
        assert_eq!(g.degree(0).unwrap(), 2);
        assert_eq!(g.out_degree(0).unwrap(), 1);
        assert_eq!(
            g.neighbors_directed(0, Direction::Out).unwrap(),
            BTreeSet::from([1])
        );
        assert_eq!(g.neighbors(0).unwrap(), BTreeSet::from([1, 2]));
    }

    #[test]
    fn rejects_dangling_parallel_and_loops() {
        let err = from_edges(3, false, &[(0, 1), (1, 5)]).unwrap_err();
        assert!(matches!(err, GraphError::InvalidEdge { index: 1, .. }));
        assert!(from_edges(2, false, &[(0, 1), (1, 0)]).is_err());
        assert!(from_edges(2, true, &[(0, 1), (1, 0)]).is_ok());
        assert!(from_edges(2, false, &[(1, 1)]).is_err());
    }

    #[test]
    fn multigraph_flag_allows_parallel_edges() {
        let mut b = GraphBuilder::undirected().graph_attr(MULTIGRAPH_FLAG, true);
        b.add_nodes(2);
        b.add_edge(0, 1, AttrMap::new()).add_edge(1, 0, AttrMap::new());
        assert_eq!(b.build().unwrap().edge_count(), 2);
    }

    #[test]
    fn rejects_bad_attrs() {
        let mut b = GraphBuilder::undirected();
        b.add_node(attrs([("x", f64::NAN)]));
        assert!(b.build().is_err());
        let mut b = GraphBuilder::undirected();
        b.add_node(attrs([("x", "a\nb")]));
        assert!(b.build().is_err());
        let mut b = GraphBuilder::undirected();
        b.add_node(attrs([("", 1i64)]));
        assert!(b.build().is_err());
    }

    #[test]
    fn ego_radius_zero_and_full() {
        let mut b = GraphBuilder::undirected();
        b.add_node(attrs([("name", "a")]));
        b.add_node(attrs([("name", "b")]));
        b.add_node(attrs([("name", "c")]));
        b.add_node(AttrMap::new());
        b.add_edge(0, 1, AttrMap::new()).add_edge(1, 2, AttrMap::new());
        let g = b.build().unwrap();
        let ego = g.ego_graph(EgoCenter::Node(1), 0).unwrap();
        assert_eq!(ego.node_count(), 1);
        assert_eq!(ego.nodes()[0].attrs["name"], AttrValue::text("b"));
        assert_eq!(ego.graph_attrs()[EGO_SOURCE_IDS], AttrValue::text("1"));
        let whole = g.ego_graph(EgoCenter::Node(0), 10).unwrap();
        assert_eq!(whole.node_count(), 3);
        assert_eq!(whole.edge_count(), 2);
        let by_edge = g.ego_graph(EgoCenter::Edge(1), 0).unwrap();
        assert_eq!(by_edge.graph_attrs()[EGO_SOURCE_IDS], AttrValue::text("1,2"));
    }

    #[test]
    fn empty_graph_file() {
        let g = AttributedGraph::empty(false);
        let text = g.to_json_string(false);
        assert_eq!(text, "{\"directed\":false,\"graph\":{},\"nodes\":[],\"edges\":[]}\n");
    }

    #[test]
    fn minimal_file_loads() {
        let text = r#"{"directed": false, "graph": {}, "nodes": [{"id": 0, "attrs": {}}, {"id": 1, "attrs": {}}],
            "edges": [{"src": 0, "dst": 1, "attrs": {}}]}"#;
        let g = AttributedGraph::from_json_str(text).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
    }

    #[test]
    fn dangling_endpoint_in_file() {
        let text = r#"{"directed": false, "nodes": [{"id": 0}, {"id": 1}, {"id": 2}],
            "edges": [{"src": 0, "dst": 5}]}"#;
        let err = AttributedGraph::from_json_str(text).unwrap_err();
        assert!(matches!(err, GraphError::InvalidEdge { index: 0, .. }), "{err}");
    }

    #[test]
    fn malformed_file_names_line() {
        let err = AttributedGraph::from_json_str("{\n\"directed\": 3}").unwrap_err();
        match err {
            GraphError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn real_formatting_is_shortest() {
        let mut b = GraphBuilder::undirected();
        b.add_node(attrs([("x", 1.5f64), ("y", 2.0f64)]));
        let text = b.build().unwrap().to_json_string(false);
        assert!(text.contains("\"x\":1.5,"), "{text}");
        assert!(text.contains("\"y\":2.0"), "{text}");
        let back = AttributedGraph::from_json_str(&text).unwrap();
        assert_eq!(back.nodes()[0].attrs["y"], AttrValue::Real(2.0));
    }
}
