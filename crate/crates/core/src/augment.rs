//! Format augmentation and the two self-supervised instruction types:
//! neighbor listing (topology reconstruction) and masked-attribute recovery.

use std::collections::BTreeMap;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AttrValue, AttributedGraph, Direction, NodeId};
use crate::sample::{build_sample, Augmentation, InstructionSample, SampleOrigin};
use crate::seed::derive_seed;
use crate::synth::solve::ElementRef;
use crate::task::{CanonicalAnswer, Metric, TaskInstance, TaskSpec, VerifyRule};
use crate::text::templates::TemplatePack;
use crate::text::{FormatKind, FormatSpec, TextError};

pub const MASK_TOKEN: &str = "unknown";
pub const DEFAULT_MASK_RATE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid augment plan: {0}")]
    Plan(String),
    #[error("graph has no maskable attributes")]
    NotApplicable,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FmaePlan {
    pub enabled: bool,
    pub mask_rate: f64,
}

impl Default for FmaePlan {
    fn default() -> Self {
        FmaePlan {
            enabled: true,
            mask_rate: DEFAULT_MASK_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPlan {
    pub formats: Vec<FormatSpec>,
    pub tae: bool,
    pub fmae: FmaePlan,
}

impl Default for AugmentPlan {
    fn default() -> Self {
        AugmentPlan {
            formats: FormatKind::ALL.into_iter().map(FormatSpec::new).collect(),
            tae: true,
            fmae: FmaePlan::default(),
        }
    }
}

impl AugmentPlan {
    pub fn single(fmt: FormatSpec) -> Self {
        AugmentPlan {
            formats: vec![fmt],
            tae: false,
            fmae: FmaePlan {
                enabled: false,
                ..FmaePlan::default()
            },
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.formats.is_empty() {
            return Err(AugmentError::Plan("formats must not be empty".into()));
        }
        for (i, f) in self.formats.iter().enumerate() {
            if self.formats[..i].iter().any(|g| g.kind == f.kind) {
                return Err(AugmentError::Plan(format!("format {} listed twice", f.kind)));
            }
        }
        let r = self.fmae.mask_rate;
        if self.fmae.enabled && !(r > 0.0 && r <= 1.0) {
            return Err(AugmentError::Plan(format!("mask_rate must lie in (0, 1], got {r}")));
        }
        Ok(())
    }
}

/// One sample per plan format with identical query and answer. The id of
/// each is `{group}-{format}`.
pub fn augment_formats(
    task: &TaskInstance,
    plan: &AugmentPlan,
    pack: &TemplatePack,
    dataset: &str,
    group: &str,
) -> Result<Vec<InstructionSample>, AugmentError> {
    plan.validate()?;
    let tag = if plan.formats.len() == 1 {
        Augmentation::None
    } else {
        Augmentation::Format
    };
    plan.formats
        .iter()
        .map(|fmt| {
            let origin = SampleOrigin {
                id: format!("{group}-{}", fmt.kind),
                dataset,
                group,
                augmentation: tag,
            };
            Ok(build_sample(task, fmt, pack, origin)?)
        })
        .collect()
}

fn bindings(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Neighbor-listing task for a seeded uniformly chosen node. Directed graphs
/// ask for out-neighbors.
pub fn make_tae_task(g: &AttributedGraph, description: &str, seed: u64) -> Result<TaskInstance, AugmentError> {
    if g.node_count() == 0 {
        return Err(AugmentError::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..g.node_count()).choose(&mut rng).expect("nonempty");
    let dir = if g.directed() { Direction::Out } else { Direction::Both };
    let nbrs = g.neighbors_directed(v, dir).expect("node exists");
    let answer = CanonicalAnswer::node_set(nbrs);
    let relation = if g.directed() {
        "receives an edge from"
    } else {
        "is adjacent to"
    };
    let mut b = bindings(&[
        ("description", description.to_string()),
        ("node", v.to_string()),
        ("relation", relation.to_string()),
    ]);
    if matches!(&answer, CanonicalAnswer::NodeSet(s) if s.is_empty()) {
        b.insert("outcome".into(), "none".into());
    }
    let query = TemplatePack::builtin()
        .render_query(&TaskSpec::TopologyAutoencoder.template_key(), &b)
        .expect("built-in neighbor template");
    Ok(TaskInstance {
        task: TaskSpec::TopologyAutoencoder,
        graph: g.clone(),
        target: Some(crate::task::Target::Node { id: v }),
        pattern: None,
        bindings: b,
        query,
        answer,
        witness: None,
        verifier: VerifyRule::SetEquality,
        metric: Metric::Accuracy,
        labels: None,
        seed,
    })
}

/// One masked (element, attribute) slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedTarget {
    pub element: MaskElement,
    pub attr: String,
    pub original: AttrValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MaskElement {
    Node { id: NodeId },
    Edge { index: usize },
}

impl From<MaskElement> for ElementRef {
    fn from(e: MaskElement) -> Self {
        match e {
            MaskElement::Node { id } => ElementRef::Node(id),
            MaskElement::Edge { index } => ElementRef::Edge(index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedGraph {
    pub graph: AttributedGraph,
    pub masked_targets: Vec<MaskedTarget>,
    /// Index into `masked_targets` of the slot the query asks about.
    pub probe: usize,
}

impl MaskedGraph {
    pub fn probe_target(&self) -> &MaskedTarget {
        &self.masked_targets[self.probe]
    }
}

/// Text and numeric attribute slots of nodes then edges, in element order.
pub fn mask_population(g: &AttributedGraph) -> Vec<(MaskElement, String)> {
    let maskable = |v: &AttrValue| !matches!(v, AttrValue::Bool(_));
    let nodes = g.nodes().iter().flat_map(|n| {
        n.attrs
            .iter()
            .filter(|(_, v)| maskable(v))
            .map(move |(k, _)| (MaskElement::Node { id: n.id }, k.clone()))
    });
    let edges = g.edges().iter().enumerate().flat_map(|(i, e)| {
        e.attrs
            .iter()
            .filter(|(_, v)| maskable(v))
            .map(move |(k, _)| (MaskElement::Edge { index: i }, k.clone()))
    });
    nodes.chain(edges).collect()
}

/// `ceil(rate * population)`, at least 1. A small slack keeps products such as
/// 0.2 * 15 (= 3.0000000000000004 in binary) from rounding up.
pub fn mask_count(rate: f64, population: usize) -> usize {
    let raw = (rate * population as f64 - 1e-9).ceil().max(1.0) as usize;
    raw.min(population)
}

pub fn mask_graph(g: &AttributedGraph, rate: f64, seed: u64) -> Result<MaskedGraph, AugmentError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(AugmentError::Plan(format!("mask rate must lie in (0, 1], got {rate}")));
    }
    let population = mask_population(g);
    if population.is_empty() {
        return Err(AugmentError::NotApplicable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = mask_count(rate, population.len());
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, population.len(), k).into_vec();
    picked.sort_unstable();
    let masked_targets: Vec<MaskedTarget> = picked
        .iter()
        .map(|&i| {
            let (element, attr) = &population[i];
            let original = match element {
                MaskElement::Node { id } => g.nodes()[*id].attrs[attr].clone(),
                MaskElement::Edge { index } => g.edges()[*index].attrs[attr].clone(),
            };
            MaskedTarget {
                element: *element,
                attr: attr.clone(),
                original,
            }
        })
        .collect();
    let probe = *(0..masked_targets.len())
        .collect::<Vec<_>>()
        .choose(&mut rng)
        .expect("at least one masked slot");
    let hit = |el: MaskElement, name: &str| {
        masked_targets
            .iter()
            .any(|t| t.element == el && t.attr == name)
    };
    let unknown = || AttrValue::text(MASK_TOKEN);
    let graph = g
        .map_attrs(
            |a| a.clone(),
            |v, a| {
                a.iter()
                    .map(|(k, x)| {
                        let masked = hit(MaskElement::Node { id: v }, k);
                        (k.clone(), if masked { unknown() } else { x.clone() })
                    })
                    .collect()
            },
            |i, a| {
                a.iter()
                    .map(|(k, x)| {
                        let masked = hit(MaskElement::Edge { index: i }, k);
                        (k.clone(), if masked { unknown() } else { x.clone() })
                    })
                    .collect()
            },
        )
        .expect("masking keeps a graph valid");
    Ok(MaskedGraph {
        graph,
        masked_targets,
        probe,
    })
}

fn element_phrase(g: &AttributedGraph, el: MaskElement) -> String {
    match el {
        MaskElement::Node { id } => format!("node {id}"),
        MaskElement::Edge { index } => {
            let e = &g.edges()[index];
            let base = if g.directed() {
                format!("the edge from node {} to node {}", e.src, e.dst)
            } else {
                format!("the edge between node {} and node {}", e.src, e.dst)
            };
            if g.is_multigraph() {
                format!("{base} (edge number {index} in the edge list)")
            } else {
                base
            }
        }
    }
}

/// Answer, verifier and metric for recovering `original`.
pub fn fmae_answer(original: &AttrValue) -> (CanonicalAnswer, VerifyRule, Metric) {
    match original {
        AttrValue::Int(i) => (CanonicalAnswer::Integer(*i), VerifyRule::ExactMatch, Metric::Accuracy),
        AttrValue::Real(r) => (
            CanonicalAnswer::Real(*r),
            VerifyRule::NumericTolerance { eps: 1e-6 },
            Metric::Accuracy,
        ),
        AttrValue::Bool(b) => (CanonicalAnswer::Boolean(*b), VerifyRule::Boolean, Metric::Accuracy),
        AttrValue::Text(s) if s.split_whitespace().count() > 1 => {
            (CanonicalAnswer::Text(s.clone()), VerifyRule::ExactMatch, Metric::RougeL)
        }
        AttrValue::Text(s) => (CanonicalAnswer::Label(s.clone()), VerifyRule::ExactMatch, Metric::Accuracy),
    }
}

pub fn make_fmae_task(m: &MaskedGraph, description: &str, seed: u64) -> TaskInstance {
    let probe = m.probe_target();
    let element = element_phrase(&m.graph, probe.element);
    let (answer, verifier, metric) = fmae_answer(&probe.original);
    let b = bindings(&[
        ("description", description.to_string()),
        ("attr", probe.attr.clone()),
        ("element", element.clone()),
        ("probe", format!("{element}: {}", probe.attr)),
        ("masked", m.masked_targets.len().to_string()),
    ]);
    let query = TemplatePack::builtin()
        .render_query(&TaskSpec::FeatureMaskedAutoencoder.template_key(), &b)
        .expect("built-in masked-attribute template");
    let target = match probe.element {
        MaskElement::Node { id } => crate::task::Target::Node { id },
        MaskElement::Edge { index } => {
            let e = &m.graph.edges()[index];
            crate::task::Target::Edge { src: e.src, dst: e.dst }
        }
    };
    TaskInstance {
        task: TaskSpec::FeatureMaskedAutoencoder,
        graph: m.graph.clone(),
        target: Some(target),
        pattern: None,
        bindings: b,
        query,
        answer,
        witness: None,
        verifier,
        metric,
        labels: None,
        seed,
    }
}

/// Every sample derived from one task instance: one per plan format, plus one
/// neighbor-listing sample and, when the graph has maskable attributes, one
/// masked-attribute sample. Both self-supervised samples use a single format
/// drawn from the plan.
pub fn expand_instance(
    task: &TaskInstance,
    plan: &AugmentPlan,
    pack: &TemplatePack,
    dataset: &str,
    index: usize,
    global_seed: u64,
) -> Result<Vec<InstructionSample>, AugmentError> {
    let group = format!("{dataset}-{index:05}");
    let mut out = augment_formats(task, plan, pack, dataset, &group)?;
    if !plan.tae && !plan.fmae.enabled {
        return Ok(out);
    }
    let idx = index.to_string();
    let stream = |name: &str| derive_seed(global_seed, &[name, dataset, &idx]);
    let mut rng = ChaCha8Rng::seed_from_u64(stream("ssl-format"));
    let fmt = plan.formats.choose(&mut rng).expect("validated plan has formats");
    let description = pack.render_description(&task.task.template_key(), &task.bindings)?;
    if plan.tae && task.graph.node_count() > 0 {
        let tae = make_tae_task(&task.graph, &description, stream("tae"))?;
        let origin = SampleOrigin {
            id: format!("{group}-tae"),
            dataset,
            group: &group,
            augmentation: Augmentation::Tae,
        };
        out.push(build_sample(&tae, fmt, pack, origin)?);
    }
    if plan.fmae.enabled {
        match mask_graph(&task.graph, plan.fmae.mask_rate, stream("fmae")) {
            Ok(m) => {
                let fmae = make_fmae_task(&m, &description, stream("fmae"));
                let origin = SampleOrigin {
                    id: format!("{group}-fmae"),
                    dataset,
                    group: &group,
                    augmentation: Augmentation::Fmae,
                };
                out.push(build_sample(&fmae, fmt, pack, origin)?);
            }
            Err(AugmentError::NotApplicable) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
