//! Task instances and their answers.
//!
//! A [`TaskInstance`] is a graph plus everything needed to ask a question about
//! it and to decide whether an answer is right: the canonical answer, an
//! optional witness and the [`VerifyRule`] that scoring applies.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{AttributedGraph, NodeId};
use crate::numfmt;

/// The eleven structure-understanding task kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "GraphSize-Node")]
    GraphSizeNode,
    #[serde(rename = "GraphSize-Edge")]
    GraphSizeEdge,
    #[serde(rename = "AttributeRetrieval-Node")]
    AttributeRetrievalNode,
    #[serde(rename = "AttributeRetrieval-Edge")]
    AttributeRetrievalEdge,
    DegreeCount,
    ShortestPath,
    MaximumTriangleSum,
    HamiltonPath,
    SubgraphMatching,
    GraphStructure,
    GraphAutomorphism,
}

/// Difficulty tier of a structure task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureLevel {
    Entity,
    Path,
    Structure,
}

impl TaskKind {
    pub const ALL: [TaskKind; 11] = [
        TaskKind::GraphSizeNode,
        TaskKind::GraphSizeEdge,
        TaskKind::AttributeRetrievalNode,
        TaskKind::AttributeRetrievalEdge,
        TaskKind::DegreeCount,
        TaskKind::ShortestPath,
        TaskKind::MaximumTriangleSum,
        TaskKind::HamiltonPath,
        TaskKind::SubgraphMatching,
        TaskKind::GraphStructure,
        TaskKind::GraphAutomorphism,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::GraphSizeNode => "GraphSize-Node",
            TaskKind::GraphSizeEdge => "GraphSize-Edge",
            TaskKind::AttributeRetrievalNode => "AttributeRetrieval-Node",
            TaskKind::AttributeRetrievalEdge => "AttributeRetrieval-Edge",
            TaskKind::DegreeCount => "DegreeCount",
            TaskKind::ShortestPath => "ShortestPath",
            TaskKind::MaximumTriangleSum => "MaximumTriangleSum",
            TaskKind::HamiltonPath => "HamiltonPath",
            TaskKind::SubgraphMatching => "SubgraphMatching",
            TaskKind::GraphStructure => "GraphStructure",
            TaskKind::GraphAutomorphism => "GraphAutomorphism",
        }
    }

    pub fn from_name(name: &str) -> Option<TaskKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn level(self) -> StructureLevel {
        use TaskKind::*;
        match self {
            GraphSizeNode | GraphSizeEdge | AttributeRetrievalNode | AttributeRetrievalEdge
            | DegreeCount => StructureLevel::Entity,
            ShortestPath | MaximumTriangleSum | HamiltonPath => StructureLevel::Path,
            SubgraphMatching | GraphStructure | GraphAutomorphism => StructureLevel::Structure,
        }
    }

    /// Tasks whose answer is yes/no and which are generated label-balanced.
    pub fn is_yes_no(self) -> bool {
        matches!(
            self,
            TaskKind::HamiltonPath | TaskKind::SubgraphMatching | TaskKind::GraphAutomorphism
        )
    }

    /// Tasks defined on undirected simple graphs only.
    pub fn undirected_only(self) -> bool {
        matches!(
            self,
            TaskKind::MaximumTriangleSum
                | TaskKind::HamiltonPath
                | TaskKind::SubgraphMatching
                | TaskKind::GraphStructure
                | TaskKind::GraphAutomorphism
        )
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticLevel {
    Node,
    Link,
    Graph,
    OpenEnded,
}

impl SemanticLevel {
    pub fn name(self) -> &'static str {
        match self {
            SemanticLevel::Node => "node",
            SemanticLevel::Link => "link",
            SemanticLevel::Graph => "graph",
            SemanticLevel::OpenEnded => "open-ended",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticTaskType {
    Multiclass,
    Binary,
    OrdinalRegression,
    Regression,
    TextGeneration,
}

impl SemanticTaskType {
    pub fn name(self) -> &'static str {
        match self {
            SemanticTaskType::Multiclass => "multiclass",
            SemanticTaskType::Binary => "binary",
            SemanticTaskType::OrdinalRegression => "ordinal-regression",
            SemanticTaskType::Regression => "regression",
            SemanticTaskType::TextGeneration => "text-generation",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            SemanticTaskType::Multiclass | SemanticTaskType::Binary => Metric::Accuracy,
            SemanticTaskType::OrdinalRegression | SemanticTaskType::Regression => Metric::Rmse,
            SemanticTaskType::TextGeneration => Metric::RougeL,
        }
    }
}

/// What a task instance asks about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskSpec {
    Structure { kind: TaskKind },
    Semantic {
        level: SemanticLevel,
        task_type: SemanticTaskType,
        /// Link tasks that ask whether an edge exists rather than for an edge label.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        link_existence: bool,
    },
    TopologyAutoencoder,
    FeatureMaskedAutoencoder,
}

impl TaskSpec {
    /// Key of the template-pack entry used to textualize this task.
    pub fn template_key(&self) -> String {
        match self {
            TaskSpec::Structure { kind } => kind.name().to_string(),
            TaskSpec::Semantic { link_existence: true, .. } => "semantic/link-existence".into(),
            TaskSpec::Semantic { level, task_type, .. } => {
                format!("semantic/{}/{}", level.name(), task_type.name())
            }
            TaskSpec::TopologyAutoencoder => "TopologyAutoencoder".into(),
            TaskSpec::FeatureMaskedAutoencoder => "FeatureMaskedAutoencoder".into(),
        }
    }

    pub fn level_name(&self) -> &'static str {
        match self {
            TaskSpec::Structure { kind } => match kind.level() {
                StructureLevel::Entity => "entity",
                StructureLevel::Path => "path",
                StructureLevel::Structure => "structure",
            },
            TaskSpec::Semantic { level, .. } => level.name(),
            TaskSpec::TopologyAutoencoder | TaskSpec::FeatureMaskedAutoencoder => "self-supervised",
        }
    }
}

/// Element a query is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    Node { id: NodeId },
    Edge { src: NodeId, dst: NodeId },
    Pair { source: NodeId, target: NodeId },
}

/// Expected shape of an answer, used to drive extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Integer,
    Real,
    Boolean,
    Label,
    NodeSet,
    Sequence,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum CanonicalAnswer {
    Integer(i64),
    Real(f64),
    Boolean(bool),
    Label(String),
    NodeSet(Vec<NodeId>),
    Sequence(Vec<NodeId>),
    Text(String),
}

impl CanonicalAnswer {
    pub fn node_set(ids: impl IntoIterator<Item = NodeId>) -> Self {
        let mut v: Vec<NodeId> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        CanonicalAnswer::NodeSet(v)
    }

    pub fn kind(&self) -> AnswerKind {
        match self {
            CanonicalAnswer::Integer(_) => AnswerKind::Integer,
            CanonicalAnswer::Real(_) => AnswerKind::Real,
            CanonicalAnswer::Boolean(_) => AnswerKind::Boolean,
            CanonicalAnswer::Label(_) => AnswerKind::Label,
            CanonicalAnswer::NodeSet(_) => AnswerKind::NodeSet,
            CanonicalAnswer::Sequence(_) => AnswerKind::Sequence,
            CanonicalAnswer::Text(_) => AnswerKind::Text,
        }
    }

    /// Text placed after `Answer:`.
    pub fn render(&self) -> String {
        match self {
            CanonicalAnswer::Integer(i) => i.to_string(),
            CanonicalAnswer::Real(r) => numfmt::real(*r),
            CanonicalAnswer::Boolean(true) => "Yes".into(),
            CanonicalAnswer::Boolean(false) => "No".into(),
            CanonicalAnswer::Label(s) | CanonicalAnswer::Text(s) => s.clone(),
            CanonicalAnswer::NodeSet(ids) if ids.is_empty() => "none".into(),
            CanonicalAnswer::NodeSet(ids) => join_ids(ids, ", "),
            CanonicalAnswer::Sequence(ids) => join_ids(ids, " -> "),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CanonicalAnswer::Integer(i) => Some(*i as f64),
            CanonicalAnswer::Real(r) => Some(*r),
            _ => None,
        }
    }
}

pub fn join_ids(ids: &[NodeId], sep: &str) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

/// Lowercase, trimmed, with surrounding punctuation removed.
pub fn normalize_label(s: &str) -> String {
    s.trim()
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_lowercase()
}

/// Edge list carried inside path verifiers so scoring needs no graph file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathGraph {
    pub n: usize,
    pub directed: bool,
    /// `(src, dst, weight)`; weight 1 for unweighted graphs.
    pub edges: Vec<(NodeId, NodeId, i64)>,
}

impl PathGraph {
    pub fn from_graph(g: &AttributedGraph) -> Self {
        PathGraph {
            n: g.node_count(),
            directed: g.directed(),
            edges: g
                .edges()
                .iter()
                .map(|e| (e.src, e.dst, e.attrs.get("weight").and_then(|w| w.as_i64()).unwrap_or(1)))
                .collect(),
        }
    }

    /// Cheapest edge weight from `u` to `v`.
    fn step(&self, u: NodeId, v: NodeId) -> Option<i64> {
        self.edges
            .iter()
            .filter(|&&(a, b, _)| (a == u && b == v) || (!self.directed && a == v && b == u))
            .map(|&(_, _, w)| w)
            .min()
    }

    /// Total weight of the walk, or `None` if a step is not an edge.
    pub fn walk_weight(&self, path: &[NodeId]) -> Option<i64> {
        if path.is_empty() || path.iter().any(|&v| v >= self.n) {
            return None;
        }
        path.windows(2)
            .map(|w| self.step(w[0], w[1]))
            .sum::<Option<i64>>()
    }

    pub fn is_hamiltonian_path(&self, path: &[NodeId]) -> bool {
        if path.len() != self.n {
            return false;
        }
        let mut seen = vec![false; self.n];
        for &v in path {
            if v >= self.n || seen[v] {
                return false;
            }
            seen[v] = true;
        }
        self.walk_weight(path).is_some()
    }
}

/// How a candidate answer is checked against the canonical one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VerifyRule {
    ExactMatch,
    SetEquality,
    /// `|candidate - expected| <= eps * max(|expected|, 1)`.
    NumericTolerance { eps: f64 },
    Boolean,
    /// Integer length must match; a supplied path must be an optimal source-target walk.
    ShortestPath {
        source: NodeId,
        target: NodeId,
        length: Option<i64>,
        graph: PathGraph,
    },
    /// Yes/no must match; a supplied path must visit every node exactly once along edges.
    HamiltonPath { exists: bool, graph: PathGraph },
}

impl VerifyRule {
    pub fn accepts(&self, expected: &CanonicalAnswer, candidate: &CanonicalAnswer) -> bool {
        use CanonicalAnswer as A;
        match self {
            VerifyRule::ExactMatch => match (expected, candidate) {
                (A::Label(a) | A::Text(a), A::Label(b) | A::Text(b)) => {
                    normalize_label(a) == normalize_label(b)
                }
                (A::Real(a), b) => b.as_f64() == Some(*a),
                (A::Integer(a), A::Integer(b)) => a == b,
                (a, b) => a == b,
            },
            VerifyRule::SetEquality => match (expected, candidate) {
                (A::NodeSet(a) | A::Sequence(a), A::NodeSet(b) | A::Sequence(b)) => {
                    let mut a = a.clone();
                    let mut b = b.clone();
                    a.sort_unstable();
                    a.dedup();
                    b.sort_unstable();
                    b.dedup();
                    a == b
                }
                _ => false,
            },
            VerifyRule::NumericTolerance { eps } => match (expected.as_f64(), candidate.as_f64()) {
                (Some(a), Some(b)) => (a - b).abs() <= eps * a.abs().max(1.0),
                _ => match (expected, candidate) {
                    (A::Label(a), A::Label(b) | A::Text(b)) => normalize_label(a) == normalize_label(b),
                    _ => false,
                },
            },
            VerifyRule::Boolean => matches!((expected, candidate), (A::Boolean(a), A::Boolean(b)) if a == b),
            VerifyRule::ShortestPath {
                source,
                target,
                length,
                graph,
            } => match candidate {
                A::Integer(l) => *length == Some(*l),
                A::Label(s) | A::Text(s) => length.is_none() && normalize_label(s) == "no path",
                A::Sequence(p) => {
                    length.is_some()
                        && p.first() == Some(source)
                        && p.last() == Some(target)
                        && graph.walk_weight(p) == *length
                }
                _ => false,
            },
            VerifyRule::HamiltonPath { exists, graph } => match candidate {
                A::Boolean(b) => b == exists,
                A::Sequence(p) => *exists && graph.is_hamiltonian_path(p),
                _ => false,
            },
        }
    }

    /// Whether a path mentioned in a prediction must also be validated.
    pub fn checks_witness(&self) -> bool {
        matches!(
            self,
            VerifyRule::ShortestPath { length: Some(_), .. } | VerifyRule::HamiltonPath { exists: true, .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Rmse,
    RougeL,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Rmse => "rmse",
            Metric::RougeL => "rouge_l",
        }
    }
}

/// A graph, a question about it and its canonical answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task: TaskSpec,
    pub graph: AttributedGraph,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<AttributedGraph>,
    /// Template placeholder values.
    pub bindings: BTreeMap<String, String>,
    /// Query rendered with the built-in template pack.
    pub query: String,
    pub answer: CanonicalAnswer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<NodeId>>,
    pub verifier: VerifyRule,
    pub metric: Metric,
    /// Closed label set for label answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub seed: u64,
}

impl TaskInstance {
    pub fn is_self_consistent(&self) -> bool {
        let base = self.verifier.accepts(&self.answer, &self.answer);
        let witness = match &self.witness {
            Some(w) if self.verifier.checks_witness() => {
                self.verifier.accepts(&self.answer, &CanonicalAnswer::Sequence(w.clone()))
            }
            _ => true,
        };
        base && witness
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::from_edges;

    #[test]
    fn renders() {
        assert_eq!(CanonicalAnswer::Integer(6).render(), "6");
        assert_eq!(CanonicalAnswer::node_set([3, 1]).render(), "1, 3");
        assert_eq!(CanonicalAnswer::NodeSet(vec![]).render(), "none");
        assert_eq!(CanonicalAnswer::Boolean(true).render(), "Yes");
        assert_eq!(CanonicalAnswer::Sequence(vec![0, 1, 2]).render(), "0 -> 1 -> 2");
        assert_eq!(CanonicalAnswer::Real(2.0).render(), "2.0");
    }

    #[test]
    fn kind_names_round_trip() {
        for k in TaskKind::ALL {
            assert_eq!(TaskKind::from_name(k.name()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn shortest_path_rule() {
        // triangle 0-1 (1), 1-2 (1), 0-2 (3)
        let graph = PathGraph {
            n: 3,
            directed: false,
            edges: vec![(0, 1, 1), (1, 2, 1), (0, 2, 3)],
        };
        let rule = VerifyRule::ShortestPath {
            source: 0,
            target: 2,
            length: Some(2),
            graph,
        };
        let ans = CanonicalAnswer::Integer(2);
        assert!(rule.accepts(&ans, &CanonicalAnswer::Integer(2)));
        assert!(!rule.accepts(&ans, &CanonicalAnswer::Integer(3)));
        assert!(rule.accepts(&ans, &CanonicalAnswer::Sequence(vec![0, 1, 2])));
        assert!(!rule.accepts(&ans, &CanonicalAnswer::Sequence(vec![0, 2])));
        assert!(!rule.accepts(&ans, &CanonicalAnswer::Sequence(vec![2, 1, 0])));
    }

    #[test]
    fn hamilton_rule() {
        let g = from_edges(3, false, &[(0, 1), (1, 2)]).unwrap();
        let rule = VerifyRule::HamiltonPath {
            exists: true,
            graph: PathGraph::from_graph(&g),
        };
        let yes = CanonicalAnswer::Boolean(true);
        assert!(rule.accepts(&yes, &CanonicalAnswer::Sequence(vec![2, 1, 0])));
        assert!(!rule.accepts(&yes, &CanonicalAnswer::Sequence(vec![1, 0, 2])));
        assert!(!rule.accepts(&yes, &CanonicalAnswer::Sequence(vec![0, 1])));
        assert!(!rule.accepts(&yes, &CanonicalAnswer::Boolean(false)));
    }

    #[test]
    fn label_and_tolerance_rules() {
        let a = CanonicalAnswer::Label("Economics".into());
        assert!(VerifyRule::ExactMatch.accepts(&a, &CanonicalAnswer::Label("economics.".into())));
        let r = CanonicalAnswer::Real(100.0);
        let rule = VerifyRule::NumericTolerance { eps: 1e-6 };
        assert!(rule.accepts(&r, &CanonicalAnswer::Real(100.00005)));
        assert!(!rule.accepts(&r, &CanonicalAnswer::Real(100.001)));
        assert!(VerifyRule::SetEquality.accepts(
            &CanonicalAnswer::node_set([1, 3]),
            &CanonicalAnswer::NodeSet(vec![3, 1])
        ));
    }
}
