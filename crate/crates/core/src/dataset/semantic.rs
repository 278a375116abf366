//! Task instances over user-supplied attributed graphs: node, link and
//! graph-level prediction around ego graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::graph::{load_graph, AttrMap, AttrValue, AttributedGraph, EgoCenter, NodeId, EGO_SOURCE_IDS};
use crate::numfmt;
use crate::task::{
    CanonicalAnswer, SemanticLevel, SemanticTaskType, Target, TaskInstance, TaskSpec, VerifyRule,
};
use crate::text::templates::TemplatePack;
use crate::text::{prompt_graph, render_graph_text, FormatSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticTaskConfig {
    /// Dataset name used in sample ids and reports.
    pub name: String,
    /// A canonical graph JSON file, or for graph-level tasks a directory of them.
    pub graph_file: PathBuf,
    pub task_level: SemanticLevel,
    pub task_type: SemanticTaskType,
    /// Label attribute. Link-level binary tasks without one ask whether an edge exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_attr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ego_radius: Option<usize>,
    pub description: String,
    /// Closed label set; defaults to the distinct label values found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Attribute holding a provided `train`/`valid`/`test` assignment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_attr: Option<String>,
}

impl SemanticTaskConfig {
    pub fn radius(&self) -> usize {
        self.ego_radius.unwrap_or(match self.task_level {
            SemanticLevel::Node => 2,
            _ => 1,
        })
    }

    pub fn link_existence(&self) -> bool {
        self.task_level == SemanticLevel::Link
            && self.task_type == SemanticTaskType::Binary
            && self.target_attr.is_none()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Config(format!("{}: {m}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', ' ']) {
            return bad("name must be nonempty without '/' or spaces".into());
        }
        if matches!(self.task_level, SemanticLevel::Node | SemanticLevel::Link) && self.ego_radius == Some(0) {
            return bad("ego_radius must be at least 1 for node and link tasks".into());
        }
        if self.target_attr.is_none() && !self.link_existence() {
            return bad("target_attr is required unless the task is binary link existence".into());
        }
        if self.link_existence() && self.split_attr.is_some() {
            return bad("split_attr is not supported for link existence (negatives have no stored split)".into());
        }
        Ok(())
    }

    fn spec(&self) -> TaskSpec {
        TaskSpec::Semantic {
            level: self.task_level,
            task_type: self.task_type,
            link_existence: self.link_existence(),
        }
    }
}

/// One prediction target before its instance is built.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    Node(NodeId),
    Edge(usize),
    NonEdge(NodeId, NodeId),
    Graph(usize),
}

/// Loaded graphs plus the candidate targets of a semantic dataset.
pub struct SemanticSource {
    pub cfg: SemanticTaskConfig,
    pub graphs: Vec<AttributedGraph>,
    pub candidates: Vec<Candidate>,
    /// Provided split per candidate when `split_attr` is set.
    pub provided_split: Option<Vec<Option<String>>>,
}

fn graph_files(path: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| DatasetError::Io {
                path: path.to_path_buf(),
                source: e,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn label_of(attrs: &AttrMap, name: &str) -> Option<AttrValue> {
    attrs.get(name).cloned()
}

fn split_value(attrs: &AttrMap, name: &Option<String>) -> Option<String> {
    name.as_ref()
        .and_then(|n| attrs.get(n))
        .map(|v| v.to_string())
}

impl SemanticSource {
    /// Loads graph files (relative paths resolve against `base`) and lists
    /// candidates. Link-existence negatives are drawn here: uniform non-edges,
    /// one per positive, seeded.
    pub fn load(cfg: &SemanticTaskConfig, base: &Path, seed: u64) -> Result<Self, DatasetError> {
        cfg.validate()?;
        let path = base.join(&cfg.graph_file);
        let files = graph_files(&path)?;
        if files.is_empty() {
            return Err(DatasetError::Config(format!("{}: no graph files under {}", cfg.name, path.display())));
        }
        if cfg.task_level != SemanticLevel::Graph && cfg.task_level != SemanticLevel::OpenEnded && files.len() != 1 {
            return Err(DatasetError::Config(format!(
                "{}: node and link tasks take exactly one graph file",
                cfg.name
            )));
        }
        let graphs = files
            .iter()
            .map(|f| load_graph(f).map_err(DatasetError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let mut candidates = Vec::new();
        let mut provided = Vec::new();
        let attr = cfg.target_attr.as_deref().unwrap_or_default();
        match cfg.task_level {
            SemanticLevel::Node => {
                for n in graphs[0].nodes() {
                    if n.attrs.contains_key(attr) {
                        candidates.push(Candidate::Node(n.id));
                        provided.push(split_value(&n.attrs, &cfg.split_attr));
                    }
                }
            }
            SemanticLevel::Link if cfg.link_existence() => {
                let g = &graphs[0];
                let positives: Vec<usize> = (0..g.edge_count()).collect();
                let negatives = sample_non_edges(g, positives.len(), seed)?;
                candidates.extend(positives.into_iter().map(Candidate::Edge));
                candidates.extend(negatives.into_iter().map(|(u, v)| Candidate::NonEdge(u, v)));
            }
            SemanticLevel::Link => {
                for (i, e) in graphs[0].edges().iter().enumerate() {
                    if e.attrs.contains_key(attr) {
                        candidates.push(Candidate::Edge(i));
                        provided.push(split_value(&e.attrs, &cfg.split_attr));
                    }
                }
            }
            SemanticLevel::Graph | SemanticLevel::OpenEnded => {
                for (i, g) in graphs.iter().enumerate() {
                    if g.graph_attrs().contains_key(attr) {
                        candidates.push(Candidate::Graph(i));
                        provided.push(split_value(g.graph_attrs(), &cfg.split_attr));
                    }
                }
            }
        }
        if candidates.is_empty() {
            return Err(DatasetError::Config(format!("{}: no labeled targets found", cfg.name)));
        }
        Ok(SemanticSource {
            cfg: cfg.clone(),
            graphs,
            candidates,
            provided_split: cfg.split_attr.as_ref().map(|_| provided),
        })
    }

    /// Label set for classification tasks.
    fn label_set(&self) -> Vec<String> {
        if let Some(l) = &self.cfg.labels {
            return l.clone();
        }
        let attr = self.cfg.target_attr.as_deref().unwrap_or_default();
        let mut set = BTreeSet::new();
        for c in &self.candidates {
            let v = match c {
                Candidate::Node(v) => label_of(&self.graphs[0].nodes()[*v].attrs, attr),
                Candidate::Edge(i) => label_of(&self.graphs[0].edges()[*i].attrs, attr),
                Candidate::Graph(i) => label_of(self.graphs[*i].graph_attrs(), attr),
                Candidate::NonEdge(..) => None,
            };
            if let Some(v) = v {
                set.insert(v.to_string());
            }
        }
        set.into_iter().collect()
    }

    /// Builds the instance for candidate `i`.
    pub fn instance(&self, i: usize, seed: u64) -> Result<TaskInstance, DatasetError> {
        let cfg = &self.cfg;
        let attr = cfg.target_attr.clone().unwrap_or_default();
        let radius = cfg.radius();
        let mut b = BTreeMap::new();
        b.insert("description".to_string(), cfg.description.clone());
        b.insert("target_attr".to_string(), attr.clone());
        let strip = |g: &AttributedGraph| -> AttributedGraph {
            let drop: Vec<&str> = [Some(attr.as_str()), cfg.split_attr.as_deref()]
                .into_iter()
                .flatten()
                .collect();
            let clean = |a: &AttrMap| -> AttrMap {
                a.iter()
                    .filter(|(k, _)| !drop.contains(&k.as_str()))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect()
            };
            g.map_attrs(clean, |_, a| clean(a), |_, a| clean(a))
                .expect("dropping attributes keeps a graph valid")
        };
        let (graph, label, target) = match &self.candidates[i] {
            Candidate::Node(v) => {
                let g = &self.graphs[0];
                let ego = g.ego_graph(EgoCenter::Node(*v), radius)?;
                let new = new_id(&ego, *v);
                b.insert("node".into(), new.to_string());
                b.insert("subject".into(), format!("node {new}"));
                let label = label_of(&g.nodes()[*v].attrs, &attr);
                (strip(&ego), label, Some(Target::Node { id: new }))
            }
            Candidate::Edge(idx) => {
                let g = &self.graphs[0];
                let e = &g.edges()[*idx];
                let ego = g.ego_graph(EgoCenter::Edge(*idx), radius)?;
                let (s, t) = (new_id(&ego, e.src), new_id(&ego, e.dst));
                // drop the queried edge (and for existence tasks any parallel copy)
                let kept = source_ids(&ego);
                let mut removed = BTreeSet::new();
                let mut pos = 0;
                for (j, f) in g.edges().iter().enumerate() {
                    if kept.binary_search(&f.src).is_ok() && kept.binary_search(&f.dst).is_ok() {
                        let same_pair = (f.src == e.src && f.dst == e.dst)
                            || (!g.directed() && f.src == e.dst && f.dst == e.src);
                        if j == *idx || (cfg.link_existence() && same_pair) {
                            removed.insert(pos);
                        }
                        pos += 1;
                    }
                }
                let ego = ego.without_edges(&removed);
                b.insert("source".into(), s.to_string());
                b.insert("target".into(), t.to_string());
                b.insert("subject".into(), link_phrase(g.directed(), s, t));
                let label = if cfg.link_existence() {
                    Some(AttrValue::Bool(true))
                } else {
                    label_of(&e.attrs, &attr)
                };
                (strip(&ego), label, Some(Target::Edge { src: s, dst: t }))
            }
            Candidate::NonEdge(u, v) => {
                let g = &self.graphs[0];
                let ego = g.ego_graph(EgoCenter::Pair(*u, *v), radius)?;
                let (s, t) = (new_id(&ego, *u), new_id(&ego, *v));
                b.insert("source".into(), s.to_string());
                b.insert("target".into(), t.to_string());
                b.insert("subject".into(), link_phrase(g.directed(), s, t));
                (strip(&ego), Some(AttrValue::Bool(false)), Some(Target::Pair { source: s, target: t }))
            }
            Candidate::Graph(gi) => {
                let g = &self.graphs[*gi];
                b.insert("subject".into(), "the graph".into());
                (strip(g), label_of(g.graph_attrs(), &attr), None)
            }
        };
        let label = label.ok_or_else(|| DatasetError::Config(format!("{}: target {i} lost its label", cfg.name)))?;
        let spec = cfg.spec();
        let (answer, verifier, labels) = match (cfg.task_type, &label) {
            (SemanticTaskType::Binary, AttrValue::Bool(x)) if cfg.link_existence() => {
                b.insert("outcome".into(), if *x { "yes" } else { "no" }.into());
                (CanonicalAnswer::Boolean(*x), VerifyRule::Boolean, None)
            }
            (SemanticTaskType::Multiclass | SemanticTaskType::Binary, v) => {
                let labels = self.label_set();
                b.insert("label_set".into(), labels.join(", "));
                (CanonicalAnswer::Label(v.to_string()), VerifyRule::ExactMatch, Some(labels))
            }
            (SemanticTaskType::OrdinalRegression | SemanticTaskType::Regression, v) => {
                let answer = match v {
                    AttrValue::Int(x) => CanonicalAnswer::Integer(*x),
                    AttrValue::Real(x) => CanonicalAnswer::Real(*x),
                    AttrValue::Text(s) => match s.trim().parse::<f64>() {
                        Ok(x) if x.is_finite() => CanonicalAnswer::Real(x),
                        _ => {
                            return Err(DatasetError::Config(format!(
                                "{}: regression label {s:?} is not numeric",
                                cfg.name
                            )))
                        }
                    },
                    AttrValue::Bool(_) => {
                        return Err(DatasetError::Config(format!("{}: regression label is boolean", cfg.name)))
                    }
                };
                (answer, VerifyRule::NumericTolerance { eps: 1e-6 }, None)
            }
            (SemanticTaskType::TextGeneration, v) => (CanonicalAnswer::Text(v.to_string()), VerifyRule::ExactMatch, None),
        };
        let pack = TemplatePack::builtin();
        let key = spec.template_key();
        let query = pack.render_query(&key, &b)?;
        let inst = TaskInstance {
            task: spec,
            graph,
            target,
            pattern: None,
            bindings: b,
            query,
            answer,
            witness: None,
            verifier,
            metric: cfg.task_type.metric(),
            labels,
            seed,
        };
        check_leakage(&inst, &cfg.name, i)?;
        Ok(inst)
    }
}

fn link_phrase(directed: bool, s: NodeId, t: NodeId) -> String {
    if directed {
        format!("the link from node {s} to node {t}")
    } else {
        format!("the link between node {s} and node {t}")
    }
}

fn source_ids(ego: &AttributedGraph) -> Vec<NodeId> {
    match ego.graph_attrs().get(EGO_SOURCE_IDS) {
        Some(AttrValue::Text(s)) if !s.is_empty() => s.split(',').map(|x| x.parse().expect("ego ids")).collect(),
        _ => Vec::new(),
    }
}

fn new_id(ego: &AttributedGraph, old: NodeId) -> NodeId {
    source_ids(ego)
        .binary_search(&old)
        .expect("center is inside its ego graph")
}

fn sample_non_edges(g: &AttributedGraph, count: usize, seed: u64) -> Result<Vec<(NodeId, NodeId)>, DatasetError> {
    let n = g.node_count();
    let mut pool = Vec::new();
    for u in 0..n {
        let range: Box<dyn Iterator<Item = NodeId>> = if g.directed() {
            Box::new(0..n)
        } else {
            Box::new(u + 1..n)
        };
        for v in range {
            if u != v && !g.has_edge(u, v) {
                pool.push((u, v));
            }
        }
    }
    if pool.len() < count {
        return Err(DatasetError::Config(format!(
            "graph has {} non-edges but {count} negatives are needed",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<(NodeId, NodeId)> = pool.choose_multiple(&mut rng, count).copied().collect();
    Ok(picked)
}

/// Whether `needle` occurs in `hay` delimited by non-alphanumeric characters.
pub fn contains_token(hay: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let word = |c: char| c.is_alphanumeric() || c == '_';
    hay.match_indices(needle).any(|(i, _)| {
        let before = hay[..i].chars().next_back();
        let after = hay[i + needle.len()..].chars().next();
        !before.is_some_and(word) && !after.is_some_and(word)
    })
}

/// A classification label must not be readable from the rendered graph.
/// Purely numeric labels are exempt since node ids and counts contain them.
fn check_leakage(inst: &TaskInstance, dataset: &str, i: usize) -> Result<(), DatasetError> {
    let CanonicalAnswer::Label(label) = &inst.answer else {
        return Ok(());
    };
    if numfmt::looks_numeric(label) {
        return Ok(());
    }
    let graph = prompt_graph(&inst.graph);
    for kind in crate::text::FormatKind::ALL {
        let text = render_graph_text(&graph, &FormatSpec::new(kind))?;
        if contains_token(&text, label) {
            return Err(DatasetError::Leakage {
                dataset: dataset.to_string(),
                target: i,
                label: label.clone(),
                format: kind.name().to_string(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_boundaries() {
        assert!(contains_token("| 0 | economics |", "economics"));
        assert!(!contains_token("macroeconomics", "economics"));
        assert!(!contains_token("economics_x", "economics"));
        assert!(contains_token("\"economics\"", "economics"));
    }
}
