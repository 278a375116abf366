//! Batch comparisons between generated instances and the oracles.

use forge_core::graph::{AttrValue, AttributedGraph, NodeId};
use forge_core::synth::{generate_batch, ErConfig, TaskConstraints};
use forge_core::task::{CanonicalAnswer, Target, TaskInstance, TaskKind, VerifyRule};

use crate::Stream;

fn batch(kind: TaskKind, count: usize, seed: u64) -> Result<Vec<TaskInstance>, String> {
    let c = TaskConstraints {
        allow_unreachable: true,
        allow_no_triangle: true,
        ..TaskConstraints::default()
    };
    generate_batch(kind, &ErConfig::default_for(kind), &c, count, seed).map_err(|e| e.to_string())
}

fn json_to_answer(v: &serde_json::Value) -> Option<CanonicalAnswer> {
    match v {
        serde_json::Value::Number(n) => n.as_i64().map(CanonicalAnswer::Integer),
        serde_json::Value::String(s) => Some(CanonicalAnswer::Label(s.clone())),
        _ => None,
    }
}

fn number_answer(x: Option<i64>, none: &str) -> CanonicalAnswer {
    match x {
        Some(v) => CanonicalAnswer::Integer(v),
        None => CanonicalAnswer::Label(none.into()),
    }
}

/// Family by definition, with complete bipartiteness found by trying every bipartition.
pub fn structure_family(g: &AttributedGraph) -> &'static str {
    let n = g.node_count();
    let mut m = vec![vec![false; n]; n];
    for e in g.edges() {
        m[e.src][e.dst] = true;
        m[e.dst][e.src] = true;
    }
    let edges = (0..n).map(|u| (u + 1..n).filter(|&v| m[u][v]).count()).sum::<usize>();
    let deg: Vec<usize> = (0..n).map(|u| m[u].iter().filter(|&&x| x).count()).collect();
    let reach = crate::ego_nodes(g, &[0], n);
    if n == 0 || reach.len() != n {
        return "general";
    }
    let tree = edges + 1 == n;
    if n >= 3 && edges == n && deg.iter().all(|&d| d == 2) {
        return "cycle";
    }
    if tree && deg.iter().all(|&d| d <= 2) {
        return "path";
    }
    if n >= 3 && tree && deg.contains(&(n - 1)) {
        return "star";
    }
    if edges == n * (n - 1) / 2 {
        return "complete";
    }
    if tree {
        return "tree";
    }
    for mask in 1..(1u32 << n) - 1 {
        let side = |v: usize| mask & (1 << v) != 0;
        let complete = (0..n).all(|u| (u + 1..n).all(|v| m[u][v] == (side(u) != side(v))));
        if complete {
            return "bipartite-complete";
        }
    }
    "general"
}

/// Disagreements between generated answers and the brute-force oracle for `kind`.
pub fn solver_mismatches(kind: TaskKind, count: usize, seed: u64) -> Result<Vec<String>, String> {
    let mut bad = Vec::new();
    for (i, t) in batch(kind, count, seed)?.iter().enumerate() {
        let g = &t.graph;
        let expected = match kind {
            TaskKind::AttributeRetrievalNode => {
                let Some(Target::Node { id }) = t.target else {
                    return Err("node target missing".into());
                };
                crate::attribute_via_json(g, "nodes", id, &t.bindings["attr"]).and_then(|v| json_to_answer(&v))
            }
            TaskKind::AttributeRetrievalEdge => {
                let Some(Target::Edge { src, dst }) = t.target else {
                    return Err("edge target missing".into());
                };
                let index = g.edges().iter().position(|e| e.src == src && e.dst == dst);
                index
                    .and_then(|k| crate::attribute_via_json(g, "edges", k, "weight"))
                    .and_then(|v| json_to_answer(&v))
            }
            TaskKind::DegreeCount => {
                let Some(Target::Node { id }) = t.target else {
                    return Err("node target missing".into());
                };
                Some(CanonicalAnswer::Integer(crate::degree(g, id) as i64))
            }
            TaskKind::ShortestPath => {
                let Some(Target::Pair { source, target }) = t.target else {
                    return Err("pair target missing".into());
                };
                let len = crate::shortest_path_length(g, source, target);
                if let (Some(l), Some(w)) = (len, &t.witness) {
                    if crate::walk_weight(g, w) != Some(l) || w.first() != Some(&source) || w.last() != Some(&target) {
                        bad.push(format!("#{i}: witness {w:?} is not an optimal walk"));
                    }
                }
                Some(number_answer(len, "no path"))
            }
            TaskKind::MaximumTriangleSum => Some(number_answer(crate::max_triangle_sum(g), "no triangle")),
            TaskKind::HamiltonPath => {
                if let Some(w) = &t.witness {
                    if !crate::is_hamilton_path(g, w) {
                        bad.push(format!("#{i}: witness {w:?} is not a Hamilton path"));
                    }
                }
                Some(CanonicalAnswer::Boolean(crate::has_hamilton_path(g)))
            }
            TaskKind::SubgraphMatching => {
                let p = t.pattern.as_ref().ok_or("pattern missing")?;
                Some(CanonicalAnswer::Boolean(crate::subgraph_exists(g, p)))
            }
            TaskKind::GraphStructure => Some(CanonicalAnswer::Label(structure_family(g).into())),
            TaskKind::GraphAutomorphism => Some(CanonicalAnswer::Boolean(crate::has_nontrivial_automorphism(g))),
            TaskKind::GraphSizeNode => Some(CanonicalAnswer::Integer(g.nodes().len() as i64)),
            TaskKind::GraphSizeEdge => Some(CanonicalAnswer::Integer(g.edges().len() as i64)),
        };
        if expected.as_ref() != Some(&t.answer) {
            bad.push(format!("#{i}: generated {:?}, oracle {:?}", t.answer, expected));
        }
    }
    Ok(bad)
}

/// All simple paths from `s` to `t` of weight at most `budget`, in DFS order,
/// stopping after `limit` paths.
fn simple_paths(g: &AttributedGraph, s: NodeId, t: NodeId, budget: i64, limit: usize) -> Vec<(Vec<NodeId>, i64)> {
    let mut out = Vec::new();
    let mut path = vec![s];
    let mut on = vec![false; g.node_count()];
    on[s] = true;
    fn go(
        g: &AttributedGraph,
        t: NodeId,
        budget: i64,
        limit: usize,
        path: &mut Vec<NodeId>,
        on: &mut Vec<bool>,
        spent: i64,
        out: &mut Vec<(Vec<NodeId>, i64)>,
    ) {
        if out.len() >= limit {
            return;
        }
        let u = *path.last().expect("nonempty path");
        if u == t {
            out.push((path.clone(), spent));
            return;
        }
        for e in g.edges() {
            let v = if e.src == u {
                e.dst
            } else if !g.directed() && e.dst == u {
                e.src
            } else {
                continue;
            };
            let w = match e.attrs.get("weight") {
                Some(AttrValue::Int(w)) => *w,
                _ => 1,
            };
            if on[v] || spent + w > budget {
                continue;
            }
            on[v] = true;
            path.push(v);
            go(g, t, budget, limit, path, on, spent + w, out);
            path.pop();
            on[v] = false;
        }
    }
    go(g, t, budget, limit, &mut path, &mut on, 0, &mut out);
    out
}

fn hamilton_paths(g: &AttributedGraph, limit: usize) -> Vec<Vec<NodeId>> {
    let n = g.node_count();
    let mut out = Vec::new();
    for s in 0..n {
        let mut path = vec![s];
        let mut on = vec![false; n];
        on[s] = true;
        fn go(g: &AttributedGraph, n: usize, limit: usize, path: &mut Vec<NodeId>, on: &mut Vec<bool>, out: &mut Vec<Vec<NodeId>>) {
            if out.len() >= limit {
                return;
            }
            if path.len() == n {
                out.push(path.clone());
                return;
            }
            let u = *path.last().expect("nonempty");
            for v in 0..n {
                if !on[v] && g.has_edge(u, v) {
                    on[v] = true;
                    path.push(v);
                    go(g, n, limit, path, on, out);
                    path.pop();
                    on[v] = false;
                }
            }
        }
        go(g, n, limit, &mut path, &mut on, &mut out);
    }
    out
}

#[derive(Debug, Default)]
pub struct Soundness {
    pub perturbed: usize,
    pub perturbed_rejected: usize,
    pub alternatives: usize,
    pub alternatives_accepted: usize,
    pub failures: Vec<String>,
}

/// Feeds the path verifiers `per_task` broken or suboptimal witnesses and
/// `per_task` alternative valid optimal witnesses for each of the Hamilton
/// and shortest-path tasks. Every witness is first classified by the oracles.
pub fn verifier_soundness(per_task: usize, seed: u64) -> Result<Soundness, String> {
    let mut out = Soundness::default();
    let mut s = Stream::new(seed);
    let (mut ham_bad, mut ham_alt, mut sp_bad, mut sp_alt) = (0, 0, 0, 0);
    let mut round = 0;
    while ham_bad < per_task || ham_alt < per_task || sp_bad < per_task || sp_alt < per_task {
        round += 1;
        if round > 400 {
            return Err(format!(
                "could not collect enough witnesses: hamilton {ham_bad} broken, {ham_alt} alternative; shortest path {sp_bad} broken, {sp_alt} alternative"
            ));
        }
        let ham_full = ham_bad >= per_task && ham_alt >= per_task;
        let hams = if ham_full { Vec::new() } else { batch(TaskKind::HamiltonPath, 200, seed ^ round)? };
        for t in hams {
            let (Some(w), VerifyRule::HamiltonPath { .. }) = (&t.witness, &t.verifier) else {
                continue;
            };
            let g = &t.graph;
            let n = w.len();
            if ham_bad < per_task && n >= 3 {
                for _ in 0..50 {
                    let (a, b) = (s.below(n), s.below(n));
                    let mut p = w.clone();
                    p.swap(a, b);
                    if a != b && !crate::is_hamilton_path(g, &p) {
                        let mut broken = p.clone();
                        // also try dropping the last node so broken length paths are covered
                        if s.chance(0.2) {
                            broken.pop();
                        }
                        out.perturbed += 1;
                        ham_bad += 1;
                        if !t.verifier.accepts(&t.answer, &CanonicalAnswer::Sequence(broken.clone())) {
                            out.perturbed_rejected += 1;
                        } else {
                            out.failures.push(format!("hamilton: accepted broken {broken:?}"));
                        }
                        break;
                    }
                }
            }
            if ham_alt < per_task {
                let reversed: Vec<NodeId> = w.iter().rev().copied().collect();
                let others = hamilton_paths(g, 20);
                let alt = others
                    .into_iter()
                    .find(|p| p != w && *p != reversed)
                    .unwrap_or(reversed);
                if alt != *w && crate::is_hamilton_path(g, &alt) {
                    out.alternatives += 1;
                    ham_alt += 1;
                    if t.verifier.accepts(&t.answer, &CanonicalAnswer::Sequence(alt.clone())) {
                        out.alternatives_accepted += 1;
                    } else {
                        out.failures.push(format!("hamilton: rejected valid {alt:?}"));
                    }
                }
            }
        }
        for t in batch(TaskKind::ShortestPath, 200, seed ^ (round << 32))? {
            let (Some(w), Some(Target::Pair { source, target })) = (&t.witness, &t.target) else {
                continue;
            };
            let g = &t.graph;
            let Some(opt) = crate::shortest_path_length(g, *source, *target) else {
                continue;
            };
            if sp_alt < per_task {
                if let Some((alt, _)) = simple_paths(g, *source, *target, opt, 50).into_iter().find(|(p, _)| p != w) {
                    if crate::walk_weight(g, &alt) == Some(opt) {
                        out.alternatives += 1;
                        sp_alt += 1;
                        if t.verifier.accepts(&t.answer, &CanonicalAnswer::Sequence(alt.clone())) {
                            out.alternatives_accepted += 1;
                        } else {
                            out.failures.push(format!("shortest path: rejected optimal {alt:?}"));
                        }
                    }
                }
            }
            if sp_bad < per_task {
                let worse = simple_paths(g, *source, *target, opt + 60, 400)
                    .into_iter()
                    .find(|(_, weight)| *weight > opt);
                if let Some((p, _)) = worse {
                    if crate::walk_weight(g, &p).is_some_and(|x| x > opt) {
                        out.perturbed += 1;
                        sp_bad += 1;
                        if !t.verifier.accepts(&t.answer, &CanonicalAnswer::Sequence(p.clone())) {
                            out.perturbed_rejected += 1;
                        } else {
                            out.failures.push(format!("shortest path: accepted suboptimal {p:?}"));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
