//! Erdős–Rényi graph generation and the structure-task generators.
//!
//! Every generator is a pure function of its configuration and seed. A task
//! generator draws candidate graphs from one seeded stream until the task's
//! constraints hold, giving up after the retry budget.

pub mod family;
pub mod solve;

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{attrs, AttrMap, AttrValue, AttributedGraph, GraphBuilder, NodeId};
use crate::seed::derive_seed;
use crate::task::{
    join_ids, CanonicalAnswer, Metric, PathGraph, Target, TaskInstance, TaskKind, TaskSpec,
    VerifyRule,
};
use crate::text::templates::TemplatePack;
use solve::{ElementRef, StructureFamily};

pub const DEFAULT_RETRY_BUDGET: usize = 1000;
pub const NODE_COLORS: [&str; 6] = ["red", "green", "blue", "yellow", "purple", "orange"];

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("{kind}: retry budget of {attempts} exhausted; unsatisfied constraint: {constraint}")]
    RetryBudget {
        kind: TaskKind,
        attempts: usize,
        constraint: String,
    },
}

/// Erdős–Rényi parameters. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErConfig {
    pub n_range: (usize, usize),
    pub p_range: (f64, f64),
    pub directed: bool,
    pub weighted: bool,
    pub weight_range: (i64, i64),
    pub seed: u64,
}

impl ErConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let (lo, hi) = self.n_range;
        if lo < 2 || lo > hi {
            return Err(GenError::Config(format!(
                "n_range must satisfy 2 <= low <= high, got [{lo}, {hi}]"
            )));
        }
        let (plo, phi) = self.p_range;
        if !(0.0..=1.0).contains(&plo) || !(0.0..=1.0).contains(&phi) || plo > phi {
            return Err(GenError::Config(format!(
                "p_range must lie in [0, 1] with low <= high, got [{plo}, {phi}]"
            )));
        }
        let (wlo, whi) = self.weight_range;
        if wlo < 1 || wlo > whi {
            return Err(GenError::Config(format!(
                "weight_range must satisfy 1 <= low <= high, got [{wlo}, {whi}]"
            )));
        }
        Ok(())
    }

    /// Per-task defaults: entity tasks n in [5,25], path tasks [5,12], structure tasks [4,8].
    pub fn default_for(kind: TaskKind) -> ErConfig {
        use crate::task::StructureLevel::*;
        let n_range = match kind.level() {
            Entity => (5, 25),
            Path => (5, 12),
            Structure => (4, 8),
        };
        let p_range = match kind {
            TaskKind::MaximumTriangleSum => (0.3, 0.7),
            TaskKind::HamiltonPath => (0.2, 0.5),
            TaskKind::GraphAutomorphism => (0.2, 0.8),
            TaskKind::SubgraphMatching => (0.2, 0.6),
            TaskKind::GraphStructure => (0.3, 0.7),
            _ => (0.1, 0.5),
        };
        let weighted = matches!(
            kind,
            TaskKind::AttributeRetrievalEdge | TaskKind::ShortestPath | TaskKind::GraphStructure
        );
        ErConfig {
            n_range,
            p_range,
            directed: false,
            weighted,
            weight_range: (1, 10),
            seed: 0,
        }
    }
}

/// Partial [`ErConfig`] as written in suite files; unset fields take the task default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_range: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_range: Option<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ErOverrides {
    pub fn resolve(&self, kind: TaskKind) -> ErConfig {
        let d = ErConfig::default_for(kind);
        ErConfig {
            n_range: self.n_range.unwrap_or(d.n_range),
            p_range: self.p_range.unwrap_or(d.p_range),
            directed: self.directed.unwrap_or(d.directed),
            weighted: self.weighted.unwrap_or(d.weighted),
            weight_range: self.weight_range.unwrap_or(d.weight_range),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

/// Solvability and sizing requirements for generated instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConstraints {
    pub retry_budget: usize,
    /// Shortest path: permit "no path" instances.
    pub allow_unreachable: bool,
    /// Triangle sum: permit "no triangle" instances.
    pub allow_no_triangle: bool,
    /// Upper bound on n; defaults to 12 for Hamilton path and 8 for automorphism.
    pub max_nodes: Option<usize>,
    /// Inclusive pattern size range for subgraph matching (at most 5 nodes).
    pub pattern_nodes: (usize, usize),
    /// Node weights for triangle sums and attribute retrieval.
    pub node_weight_range: (i64, i64),
    /// Required yes/no answer; set per instance by [`generate_batch`] to balance labels.
    pub label: Option<bool>,
    /// Required family for the graph-structure task.
    pub family: Option<StructureFamily>,
    /// Balance yes/no labels (or structure families) across a batch.
    pub balance: bool,
}

impl Default for TaskConstraints {
    fn default() -> Self {
        TaskConstraints {
            retry_budget: DEFAULT_RETRY_BUDGET,
            allow_unreachable: false,
            allow_no_triangle: false,
            max_nodes: None,
            pattern_nodes: (3, 5),
            node_weight_range: (1, 20),
            label: None,
            family: None,
            balance: true,
        }
    }
}

impl TaskConstraints {
    fn node_cap(&self, kind: TaskKind) -> Option<usize> {
        self.max_nodes.or(match kind {
            TaskKind::HamiltonPath => Some(12),
            TaskKind::GraphAutomorphism => Some(8),
            _ => None,
        })
    }

    pub fn validate(&self, kind: TaskKind, cfg: &ErConfig) -> Result<(), GenError> {
        cfg.validate()?;
        if self.retry_budget == 0 {
            return Err(GenError::Config("retry_budget must be positive".into()));
        }
        if kind.undirected_only() && cfg.directed {
            return Err(GenError::Config(format!("{kind} is defined on undirected graphs only")));
        }
        if let Some(cap) = self.node_cap(kind) {
            if cfg.n_range.1 > cap {
                return Err(GenError::Config(format!(
                    "{kind}: n_range upper bound {} exceeds the node cap {cap}",
                    cfg.n_range.1
                )));
            }
        }
        let (plo, phi) = self.pattern_nodes;
        if kind == TaskKind::SubgraphMatching && (plo < 2 || plo > phi || phi > 5) {
            return Err(GenError::Config(format!(
                "pattern_nodes must satisfy 2 <= low <= high <= 5, got [{plo}, {phi}]"
            )));
        }
        let (wlo, whi) = self.node_weight_range;
        if wlo > whi {
            return Err(GenError::Config("node_weight_range low exceeds high".into()));
        }
        if kind == TaskKind::GraphStructure {
            if let Some(f) = self.family {
                if cfg.n_range.1 < family::min_nodes(f) {
                    return Err(GenError::Config(format!(
                        "family {f} needs at least {} nodes",
                        family::min_nodes(f)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draws an ER graph; fully determined by `cfg.seed`.
pub fn gen_er(cfg: &ErConfig) -> AttributedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    er_graph(cfg, &mut rng)
}

fn er_graph<R: Rng>(cfg: &ErConfig, rng: &mut R) -> AttributedGraph {
    let n = rng.gen_range(cfg.n_range.0..=cfg.n_range.1);
    let p = if cfg.p_range.0 == cfg.p_range.1 {
        cfg.p_range.0
    } else {
        rng.gen_range(cfg.p_range.0..=cfg.p_range.1)
    };
    let mut b = GraphBuilder::new(cfg.directed);
    b.add_nodes(n);
    for i in 0..n {
        let others: Box<dyn Iterator<Item = NodeId>> = if cfg.directed {
            Box::new((0..n).filter(move |&j| j != i))
        } else {
            Box::new(i + 1..n)
        };
        for j in others {
            if rng.gen::<f64>() < p {
                let a = if cfg.weighted {
                    attrs([("weight", rng.gen_range(cfg.weight_range.0..=cfg.weight_range.1))])
                } else {
                    AttrMap::new()
                };
                b.add_edge(i, j, a);
            }
        }
    }
    b.build().expect("generated graph is valid")
}

/// Replaces node attribute maps, keeping topology.
fn with_node_attrs<R: Rng>(
    g: &AttributedGraph,
    rng: &mut R,
    mut make: impl FnMut(&mut R) -> AttrMap,
) -> AttributedGraph {
    let fresh: Vec<AttrMap> = (0..g.node_count()).map(|_| make(rng)).collect();
    g.map_attrs(|a| a.clone(), |v, _| fresh[v].clone(), |_, a| a.clone())
        .expect("attribute maps are valid")
}

fn graph_kind_phrase(g: &AttributedGraph, node_weights: bool) -> String {
    let mut s = String::from(if g.directed() {
        "a directed graph"
    } else {
        "an undirected graph"
    });
    let edge_weights = g.edges().iter().any(|e| e.attrs.contains_key("weight"));
    match (edge_weights, node_weights) {
        (true, true) => s.push_str(" with integer edge weights and integer node weights"),
        (true, false) => s.push_str(" with integer edge weights"),
        (false, true) => s.push_str(" where every node has an integer weight"),
        (false, false) => {}
    }
    s
}

fn edge_phrase(directed: bool, u: NodeId, v: NodeId) -> String {
    if directed {
        format!("the edge from node {u} to node {v}")
    } else {
        format!("the edge between node {u} and node {v}")
    }
}

fn answer_from_attr(v: &AttrValue) -> CanonicalAnswer {
    match v {
        AttrValue::Int(i) => CanonicalAnswer::Integer(*i),
        AttrValue::Real(r) => CanonicalAnswer::Real(*r),
        AttrValue::Bool(b) => CanonicalAnswer::Boolean(*b),
        AttrValue::Text(s) => CanonicalAnswer::Label(s.clone()),
    }
}

struct Draft {
    graph: AttributedGraph,
    target: Option<Target>,
    pattern: Option<AttributedGraph>,
    bindings: BTreeMap<String, String>,
    answer: CanonicalAnswer,
    witness: Option<Vec<NodeId>>,
    verifier: VerifyRule,
    labels: Option<Vec<String>>,
}

impl Draft {
    fn new(graph: AttributedGraph, answer: CanonicalAnswer, verifier: VerifyRule) -> Self {
        Draft {
            graph,
            target: None,
            pattern: None,
            bindings: BTreeMap::new(),
            answer,
            witness: None,
            verifier,
            labels: None,
        }
    }

    fn bind(mut self, key: &str, value: impl ToString) -> Self {
        self.bindings.insert(key.to_string(), value.to_string());
        self
    }
}

type Attempt = Result<Draft, &'static str>;

/// Generates one instance of `kind`, resampling until `constraints` hold.
pub fn gen_task(
    kind: TaskKind,
    cfg: &ErConfig,
    constraints: &TaskConstraints,
) -> Result<TaskInstance, GenError> {
    constraints.validate(kind, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last = "none";
    for _ in 0..constraints.retry_budget {
        match attempt(kind, cfg, constraints, &mut rng) {
            Ok(draft) => return Ok(finish(kind, draft, cfg.seed)),
            Err(reason) => last = reason,
        }
    }
    Err(GenError::RetryBudget {
        kind,
        attempts: constraints.retry_budget,
        constraint: last.to_string(),
    })
}

fn finish(kind: TaskKind, draft: Draft, seed: u64) -> TaskInstance {
    let mut bindings = draft.bindings;
    let node_weights = matches!(
        kind,
        TaskKind::MaximumTriangleSum | TaskKind::AttributeRetrievalNode
    );
    bindings.insert(
        "graph_kind".into(),
        graph_kind_phrase(&draft.graph, node_weights),
    );
    bindings.insert("answer".into(), draft.answer.render());
    let spec = TaskSpec::Structure { kind };
    let query = TemplatePack::builtin()
        .render_query(&spec.template_key(), &bindings)
        .expect("built-in templates cover every structure task");
    TaskInstance {
        task: spec,
        graph: draft.graph,
        target: draft.target,
        pattern: draft.pattern,
        bindings,
        query,
        answer: draft.answer,
        witness: draft.witness,
        verifier: draft.verifier,
        metric: Metric::Accuracy,
        labels: draft.labels,
        seed,
    }
}

fn attempt<R: Rng>(
    kind: TaskKind,
    cfg: &ErConfig,
    c: &TaskConstraints,
    rng: &mut R,
) -> Attempt {
    match kind {
        TaskKind::GraphSizeNode => {
            let g = er_graph(cfg, rng);
            let (n, _) = solve::solve_graph_size(&g);
            Ok(Draft::new(g, CanonicalAnswer::Integer(n as i64), VerifyRule::ExactMatch))
        }
        TaskKind::GraphSizeEdge => {
            let g = er_graph(cfg, rng);
            let (_, m) = solve::solve_graph_size(&g);
            Ok(Draft::new(g, CanonicalAnswer::Integer(m as i64), VerifyRule::ExactMatch))
        }
        TaskKind::AttributeRetrievalNode => {
            let base = er_graph(cfg, rng);
            let (wlo, whi) = c.node_weight_range;
            let g = with_node_attrs(&base, rng, |r| {
                attrs([
                    ("color", AttrValue::text(*NODE_COLORS.choose(r).expect("colors"))),
                    ("weight", AttrValue::Int(r.gen_range(wlo..=whi))),
                ])
            });
            let v = rng.gen_range(0..g.node_count());
            let names: Vec<&String> = g.nodes()[v].attrs.keys().collect();
            let attr = names.choose(rng).expect("attributes").to_string();
            let value = solve::solve_attribute_retrieval(&g, ElementRef::Node(v), &attr)
                .map_err(|_| "target attribute present")?;
            let labels = matches!(value, AttrValue::Text(_))
                .then(|| NODE_COLORS.iter().map(|s| s.to_string()).collect());
            let mut d = Draft::new(g, answer_from_attr(&value), VerifyRule::ExactMatch)
                .bind("node", v)
                .bind("attr", &attr);
            d.target = Some(Target::Node { id: v });
            d.labels = labels;
            Ok(d)
        }
        TaskKind::AttributeRetrievalEdge => {
            let mut er = cfg.clone();
            er.weighted = true;
            let g = er_graph(&er, rng);
            if g.edge_count() == 0 {
                return Err("graph has at least one edge");
            }
            let i = rng.gen_range(0..g.edge_count());
            let value = solve::solve_attribute_retrieval(&g, ElementRef::Edge(i), "weight")
                .map_err(|_| "target attribute present")?;
            let e = &g.edges()[i];
            let (u, v) = (e.src, e.dst);
            let edge = edge_phrase(g.directed(), u, v);
            let mut d = Draft::new(g, answer_from_attr(&value), VerifyRule::ExactMatch)
                .bind("source", u)
                .bind("target", v)
                .bind("edge", edge)
                .bind("attr", "weight");
            d.target = Some(Target::Edge { src: u, dst: v });
            Ok(d)
        }
        TaskKind::DegreeCount => {
            let g = er_graph(cfg, rng);
            let v = rng.gen_range(0..g.node_count());
            let deg = solve::solve_degree(&g, v).map_err(|_| "node exists")?;
            let note = if g.directed() {
                " Count both incoming and outgoing edges (the total degree)."
            } else {
                ""
            };
            let mut d = Draft::new(g, CanonicalAnswer::Integer(deg as i64), VerifyRule::ExactMatch)
                .bind("node", v)
                .bind("degree_note", note);
            d.target = Some(Target::Node { id: v });
            Ok(d)
        }
        TaskKind::ShortestPath => {
            let g = er_graph(cfg, rng);
            let n = g.node_count();
            let s = rng.gen_range(0..n);
            let mut t = rng.gen_range(0..n - 1);
            if t >= s {
                t += 1;
            }
            let sp = solve::solve_shortest_path(&g, s, t).map_err(|_| "endpoints exist")?;
            if sp.is_none() && !c.allow_unreachable {
                return Err("source and target are connected");
            }
            let weighted = g.edges().iter().any(|e| e.attrs.contains_key("weight"));
            let length_kind = if weighted {
                "total edge weight"
            } else {
                "number of edges"
            };
            let graph = PathGraph::from_graph(&g);
            let (answer, witness, outcome) = match &sp {
                Some(p) => (CanonicalAnswer::Integer(p.length), Some(p.path.clone()), "reachable"),
                None => (CanonicalAnswer::Label("no path".into()), None, "unreachable"),
            };
            let path_text = witness.as_deref().map(|w| join_ids(w, " -> ")).unwrap_or_default();
            let verifier = VerifyRule::ShortestPath {
                source: s,
                target: t,
                length: sp.as_ref().map(|p| p.length),
                graph,
            };
            let mut d = Draft::new(g, answer, verifier)
                .bind("source", s)
                .bind("target", t)
                .bind("length_kind", length_kind)
                .bind("path", path_text)
                .bind("outcome", outcome);
            d.target = Some(Target::Pair { source: s, target: t });
            d.witness = witness;
            Ok(d)
        }
        TaskKind::MaximumTriangleSum => {
            let base = er_graph(cfg, rng);
            let (wlo, whi) = c.node_weight_range;
            let g = with_node_attrs(&base, rng, |r| attrs([("weight", r.gen_range(wlo..=whi))]));
            match solve::solve_max_triangle_sum(&g) {
                Some(sum) => Ok(Draft::new(g, CanonicalAnswer::Integer(sum), VerifyRule::ExactMatch)
                    .bind("outcome", "found")),
                None if c.allow_no_triangle => Ok(Draft::new(
                    g,
                    CanonicalAnswer::Label("no triangle".into()),
                    VerifyRule::ExactMatch,
                )
                .bind("outcome", "none")),
                None => Err("graph contains a triangle"),
            }
        }
        TaskKind::HamiltonPath => {
            let g = er_graph(cfg, rng);
            let witness = solve::solve_hamilton_path(&g);
            let exists = witness.is_some();
            if c.label.is_some_and(|want| want != exists) {
                return Err("requested yes/no label");
            }
            let verifier = VerifyRule::HamiltonPath {
                exists,
                graph: PathGraph::from_graph(&g),
            };
            let path_text = witness.as_deref().map(|w| join_ids(w, " -> ")).unwrap_or_default();
            let mut d = Draft::new(g, CanonicalAnswer::Boolean(exists), verifier)
                .bind("path", path_text)
                .bind("outcome", if exists { "yes" } else { "no" });
            d.witness = witness;
            Ok(d)
        }
        TaskKind::SubgraphMatching => {
            let g = er_graph(cfg, rng);
            let hi = c.pattern_nodes.1.min(g.node_count());
            if hi < c.pattern_nodes.0 {
                return Err("graph has at least as many nodes as the pattern");
            }
            let k = rng.gen_range(c.pattern_nodes.0..=hi);
            let pattern = random_connected(k, 0.3, rng);
            let found = solve::solve_subgraph_matching(&g, &pattern);
            if c.label.is_some_and(|want| want != found) {
                return Err("requested yes/no label");
            }
            let edges: Vec<String> = pattern
                .edges()
                .iter()
                .map(|e| format!("({}, {})", e.src, e.dst))
                .collect();
            let mut d = Draft::new(g, CanonicalAnswer::Boolean(found), VerifyRule::Boolean)
                .bind("pattern_max", k - 1)
                .bind("pattern_size", k)
                .bind("pattern_edges", edges.join(", "))
                .bind("outcome", if found { "yes" } else { "no" });
            d.pattern = Some(pattern);
            Ok(d)
        }
        TaskKind::GraphStructure => {
            let fam = c
                .family
                .unwrap_or_else(|| *StructureFamily::ALL.choose(rng).expect("families"));
            let n = rng.gen_range(cfg.n_range.0..=cfg.n_range.1);
            if n < family::min_nodes(fam) {
                return Err("family is realizable at the drawn size");
            }
            let p = if cfg.p_range.0 == cfg.p_range.1 {
                cfg.p_range.0
            } else {
                rng.gen_range(cfg.p_range.0..=cfg.p_range.1)
            };
            let raw = family::family_edges(fam, n, p, rng);
            let edges = family::relabel(n, &raw, rng);
            let mut b = GraphBuilder::undirected();
            b.add_nodes(n);
            for (u, v) in edges {
                let a = if cfg.weighted {
                    attrs([("weight", rng.gen_range(cfg.weight_range.0..=cfg.weight_range.1))])
                } else {
                    AttrMap::new()
                };
                b.add_edge(u, v, a);
            }
            let g = b.build().expect("family graph is valid");
            if solve::solve_graph_structure(&g) != fam {
                return Err("sampled graph classifies as its family");
            }
            let labels = StructureFamily::ALL.iter().map(|f| f.label().to_string()).collect();
            let mut d = Draft::new(g, CanonicalAnswer::Label(fam.label().into()), VerifyRule::ExactMatch);
            d.labels = Some(labels);
            Ok(d)
        }
        TaskKind::GraphAutomorphism => {
            let g = er_graph(cfg, rng);
            let found = solve::solve_graph_automorphism(&g);
            if c.label.is_some_and(|want| want != found) {
                return Err("requested yes/no label");
            }
            Ok(Draft::new(g, CanonicalAnswer::Boolean(found), VerifyRule::Boolean)
                .bind("outcome", if found { "yes" } else { "no" }))
        }
    }
}

/// Random connected undirected graph: a random recursive tree plus extra edges.
fn random_connected<R: Rng>(k: usize, extra: f64, rng: &mut R) -> AttributedGraph {
    let mut present = vec![vec![false; k]; k];
    for i in 1..k {
        let j = rng.gen_range(0..i);
        present[j][i] = true;
    }
    for i in 0..k {
        for j in i + 1..k {
            if !present[i][j] && rng.gen::<f64>() < extra {
                present[i][j] = true;
            }
        }
    }
    let mut b = GraphBuilder::undirected();
    b.add_nodes(k);
    for (i, row) in present.iter().enumerate() {
        for (j, &on) in row.iter().enumerate() {
            if on {
                b.add_edge(i, j, AttrMap::new());
            }
        }
    }
    b.build().expect("pattern graph is valid")
}

/// Key identifying the graph as shown in a prompt. Instances of a batch never
/// share one, so no graph text can appear in more than one split.
fn content_key(t: &TaskInstance) -> String {
    serde_json::to_string(&crate::text::prompt_graph(&t.graph)).expect("graph serializes")
}

fn instance_seed(global: u64, kind: TaskKind, index: usize, draw: usize) -> u64 {
    derive_seed(
        global,
        &["generate", kind.name(), &index.to_string(), &draw.to_string()],
    )
}

/// Generates `count` distinct instances of `kind`. Instance `i` uses the seed
/// stream `("generate", kind, i, draw)`; a duplicate of an earlier instance is
/// redrawn with the next `draw`. Yes/no tasks alternate their required label
/// and the structure task cycles through families when `balance` is set.
pub fn generate_batch(
    kind: TaskKind,
    er: &ErConfig,
    constraints: &TaskConstraints,
    count: usize,
    global_seed: u64,
) -> Result<Vec<TaskInstance>, GenError> {
    constraints.validate(kind, er)?;
    let per_index = |index: usize| {
        let mut c = constraints.clone();
        if c.balance {
            if kind.is_yes_no() && c.label.is_none() {
                c.label = Some(index % 2 == 0);
            }
            if kind == TaskKind::GraphStructure && c.family.is_none() {
                let usable: Vec<StructureFamily> = StructureFamily::ALL
                    .into_iter()
                    .filter(|f| family::min_nodes(*f) <= er.n_range.1)
                    .collect();
                c.family = Some(usable[index % usable.len()]);
            }
        }
        c
    };
    let draw = |index: usize, d: usize| {
        let mut cfg = er.clone();
        cfg.seed = instance_seed(global_seed, kind, index, d);
        gen_task(kind, &cfg, &per_index(index))
    };
    let first: Vec<Result<TaskInstance, GenError>> =
        (0..count).into_par_iter().map(|i| draw(i, 0)).collect();
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    for (index, inst) in first.into_iter().enumerate() {
        let mut inst = inst?;
        let mut d = 0;
        while !seen.insert(content_key(&inst)) {
            d += 1;
            if d >= constraints.retry_budget {
                return Err(GenError::RetryBudget {
                    kind,
                    attempts: d,
                    constraint: format!("instance {index} distinct from earlier instances"),
                });
            }
            inst = draw(index, d)?;
        }
        out.push(inst);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn er(n: usize, p: f64, seed: u64) -> ErConfig {
        ErConfig {
            n_range: (n, n),
            p_range: (p, p),
            directed: false,
            weighted: false,
            weight_range: (1, 10),
            seed,
        }
    }

    #[test]
    fn complete_and_empty() {
        let g = gen_er(&er(4, 1.0, 3));
        assert_eq!((g.node_count(), g.edge_count()), (4, 6));
        let g = gen_er(&er(5, 0.0, 3));
        assert_eq!((g.node_count(), g.edge_count()), (5, 0));
        let mut d = er(4, 1.0, 3);
        d.directed = true;
        assert_eq!(gen_er(&d).edge_count(), 12);
    }

    #[test]
    fn er_is_deterministic() {
        let mut c = er(10, 0.4, 99);
        c.n_range = (5, 20);
        c.p_range = (0.1, 0.9);
        c.weighted = true;
        assert_eq!(gen_er(&c), gen_er(&c));
        c.seed = 100;
        let other = gen_er(&c);
        c.seed = 99;
        assert_ne!(gen_er(&c), other);
    }

    #[test]
    fn config_validation() {
        assert!(er(1, 0.5, 0).validate().is_err());
        assert!(er(4, 1.5, 0).validate().is_err());
        let mut c = er(4, 0.5, 0);
        c.weight_range = (0, 3);
        assert!(c.validate().is_err());
        let mut d = ErConfig::default_for(TaskKind::HamiltonPath);
        d.directed = true;
        assert!(gen_task(TaskKind::HamiltonPath, &d, &TaskConstraints::default()).is_err());
        let mut big = ErConfig::default_for(TaskKind::GraphAutomorphism);
        big.n_range = (4, 9);
        assert!(matches!(
            gen_task(TaskKind::GraphAutomorphism, &big, &TaskConstraints::default()),
            Err(GenError::Config(_))
        ));
    }

    #[test]
    fn graph_size_node_answer() {
        for seed in 0..20 {
            let mut c = ErConfig::default_for(TaskKind::GraphSizeNode);
            c.seed = seed;
            let t = gen_task(TaskKind::GraphSizeNode, &c, &TaskConstraints::default()).unwrap();
            assert_eq!(t.answer, CanonicalAnswer::Integer(t.graph.node_count() as i64));
            assert!(t.is_self_consistent());
        }
    }

    #[test]
    fn shortest_path_is_reachable_by_default() {
        let mut c = ErConfig::default_for(TaskKind::ShortestPath);
        c.p_range = (0.05, 0.1);
        for seed in 0..30 {
            c.seed = seed;
            let t = gen_task(TaskKind::ShortestPath, &c, &TaskConstraints::default()).unwrap();
            assert!(matches!(t.answer, CanonicalAnswer::Integer(_)));
            assert!(t.query.contains(&format!("node {}", t.bindings["source"])));
        }
    }

    #[test]
    fn retry_budget_is_reported() {
        let c = er(5, 0.0, 1);
        let mut k = TaskConstraints::default();
        k.retry_budget = 5;
        let err = gen_task(TaskKind::MaximumTriangleSum, &c, &k).unwrap_err();
        match err {
            GenError::RetryBudget { constraint, attempts, .. } => {
                assert_eq!(attempts, 5);
                assert!(constraint.contains("triangle"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn batch_balances_and_is_deterministic() {
        let er = ErConfig::default_for(TaskKind::HamiltonPath);
        let a = generate_batch(TaskKind::HamiltonPath, &er, &TaskConstraints::default(), 40, 5).unwrap();
        let b = generate_batch(TaskKind::HamiltonPath, &er, &TaskConstraints::default(), 40, 5).unwrap();
        assert_eq!(a, b);
        let yes = a.iter().filter(|t| t.answer == CanonicalAnswer::Boolean(true)).count();
        assert_eq!(yes, 20);
        let keys: HashSet<String> = a.iter().map(content_key).collect();
        assert_eq!(keys.len(), 40);
    }

    #[test]
    fn structure_batch_cycles_families() {
        let er = ErConfig::default_for(TaskKind::GraphStructure);
        let batch = generate_batch(TaskKind::GraphStructure, &er, &TaskConstraints::default(), 70, 1).unwrap();
        for (i, t) in batch.iter().enumerate() {
            let fam = StructureFamily::ALL[i % 7];
            assert_eq!(t.answer, CanonicalAnswer::Label(fam.label().into()));
            assert_eq!(solve::solve_graph_structure(&t.graph), fam);
        }
    }
}
