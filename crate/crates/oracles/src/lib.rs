//! Slow, obviously-correct reference implementations for cross-checking the
//! solvers, verifiers and metrics in `forge-core`, plus small graph fixtures.
//!
//! Nothing here shares code with the implementations under test beyond the
//! graph container itself.

pub mod checks;

use std::collections::{BTreeSet, HashMap};

use forge_core::graph::{attrs, AttrValue, AttributedGraph, GraphBuilder, NodeId};
use forge_core::seed::splitmix64;

/// Degree by scanning the whole edge list; a self-loop counts twice.
pub fn degree(g: &AttributedGraph, v: NodeId) -> usize {
    g.edges()
        .iter()
        .map(|e| usize::from(e.src == v) + usize::from(e.dst == v))
        .sum()
}

/// Neighbors by scanning the edge list: out-neighbors when directed.
pub fn neighbors(g: &AttributedGraph, v: NodeId) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    for e in g.edges() {
        if e.src == v {
            out.insert(e.dst);
        }
        if !g.directed() && e.dst == v {
            out.insert(e.src);
        }
    }
    out
}

/// Attribute lookup through the canonical JSON document.
pub fn attribute_via_json(g: &AttributedGraph, element: &str, index: usize, attr: &str) -> Option<serde_json::Value> {
    let doc: serde_json::Value = serde_json::from_str(&g.to_json_string(false)).ok()?;
    doc.get(element)?.get(index)?.get("attrs")?.get(attr).cloned()
}

fn weight_of(attrs: &forge_core::graph::AttrMap, default: i64) -> i64 {
    match attrs.get("weight") {
        Some(AttrValue::Int(w)) => *w,
        _ => default,
    }
}

/// Bellman-Ford over the edge list; edge weight defaults to 1.
pub fn shortest_path_length(g: &AttributedGraph, s: NodeId, t: NodeId) -> Option<i64> {
    let n = g.node_count();
    let mut dist: Vec<Option<i64>> = vec![None; n];
    dist[s] = Some(0);
    for _ in 0..n {
        let mut changed = false;
        for e in g.edges() {
            let w = weight_of(&e.attrs, 1);
            let mut relax = |a: NodeId, b: NodeId| {
                if let Some(da) = dist[a] {
                    if dist[b].map_or(true, |db| da + w < db) {
                        dist[b] = Some(da + w);
                        changed = true;
                    }
                }
            };
            relax(e.src, e.dst);
            if !g.directed() {
                relax(e.dst, e.src);
            }
        }
        if !changed {
            break;
        }
    }
    dist[t]
}

fn adjacency_matrix(g: &AttributedGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut m = vec![vec![false; n]; n];
    for e in g.edges() {
        if e.src != e.dst {
            m[e.src][e.dst] = true;
            m[e.dst][e.src] = true;
        }
    }
    m
}

/// Triple loop over `k < j < i`; node weight defaults to 0.
pub fn max_triangle_sum(g: &AttributedGraph) -> Option<i64> {
    let m = adjacency_matrix(g);
    let n = m.len();
    let w: Vec<i64> = g.nodes().iter().map(|v| weight_of(&v.attrs, 0)).collect();
    let mut best = None;
    for i in (0..n).rev() {
        for j in (0..i).rev() {
            for k in (0..j).rev() {
                if m[i][j] && m[j][k] && m[i][k] {
                    let s = w[i] + w[j] + w[k];
                    if best.map_or(true, |b| s > b) {
                        best = Some(s);
                    }
                }
            }
        }
    }
    best
}

/// Held-Karp reachability over (visited set, last node) on the undirected view.
pub fn has_hamilton_path(g: &AttributedGraph) -> bool {
    let m = adjacency_matrix(g);
    let n = m.len();
    if n <= 1 {
        return true;
    }
    let full = (1usize << n) - 1;
    let mut reach = vec![vec![false; n]; 1 << n];
    for v in 0..n {
        reach[1 << v][v] = true;
    }
    for set in 1..=full {
        for last in 0..n {
            if !reach[set][last] {
                continue;
            }
            for next in 0..n {
                if set & (1 << next) == 0 && m[last][next] {
                    reach[set | (1 << next)][next] = true;
                }
            }
        }
    }
    reach[full].iter().any(|&r| r)
}

/// Whether `path` visits every node exactly once along edges of `g`.
pub fn is_hamilton_path(g: &AttributedGraph, path: &[NodeId]) -> bool {
    let m = adjacency_matrix(g);
    let n = m.len();
    let distinct: BTreeSet<NodeId> = path.iter().copied().collect();
    path.len() == n
        && distinct.len() == n
        && path.iter().all(|&v| v < n)
        && path.windows(2).all(|w| m[w[0]][w[1]])
}

/// Weight of a walk choosing the lightest parallel edge per step, or `None`
/// when some step is not an edge.
pub fn walk_weight(g: &AttributedGraph, path: &[NodeId]) -> Option<i64> {
    let mut total = 0;
    for w in path.windows(2) {
        let step = g
            .edges()
            .iter()
            .filter(|e| (e.src == w[0] && e.dst == w[1]) || (!g.directed() && e.src == w[1] && e.dst == w[0]))
            .map(|e| weight_of(&e.attrs, 1))
            .min()?;
        total += step;
    }
    Some(total)
}

fn next_injection(map: &mut Vec<NodeId>, n: usize) -> bool {
    // odometer over all k-tuples, skipping non-injective ones
    let k = map.len();
    loop {
        let mut i = k;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            map[i] += 1;
            if map[i] < n {
                break;
            }
            map[i] = 0;
        }
        let set: BTreeSet<&NodeId> = map.iter().collect();
        if set.len() == k {
            return true;
        }
    }
}

/// Every injective map from pattern nodes to graph nodes, checked edge by edge.
pub fn subgraph_exists(g: &AttributedGraph, pattern: &AttributedGraph) -> bool {
    let m = adjacency_matrix(g);
    let (n, k) = (g.node_count(), pattern.node_count());
    if k > n {
        return false;
    }
    if k == 0 {
        return true;
    }
    let ok = |map: &[NodeId]| pattern.edges().iter().all(|e| e.src == e.dst || m[map[e.src]][map[e.dst]]);
    let mut map: Vec<NodeId> = (0..k).collect();
    loop {
        if ok(&map) {
            return true;
        }
        if !next_injection(&mut map, n) {
            return false;
        }
    }
}

/// Every permutation of the node set except the identity.
pub fn has_nontrivial_automorphism(g: &AttributedGraph) -> bool {
    let m = adjacency_matrix(g);
    let n = m.len();
    let mut perm: Vec<NodeId> = (0..n).collect();
    // Heap's algorithm, iterative
    let mut c = vec![0usize; n];
    let preserves = |p: &[NodeId]| (0..n).all(|u| (u + 1..n).all(|v| m[u][v] == m[p[u]][p[v]]));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            if preserves(&perm) && perm.iter().enumerate().any(|(a, &b)| a != b) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

/// Nodes within `radius` hops, found by repeated frontier expansion over the edge list.
pub fn ego_nodes(g: &AttributedGraph, centers: &[NodeId], radius: usize) -> BTreeSet<NodeId> {
    let mut seen: BTreeSet<NodeId> = centers.iter().copied().collect();
    for _ in 0..radius {
        let mut grown = seen.clone();
        for e in g.edges() {
            if seen.contains(&e.src) {
                grown.insert(e.dst);
            }
            if seen.contains(&e.dst) {
                grown.insert(e.src);
            }
        }
        seen = grown;
    }
    seen
}

/// LCS length by memoized recursion on suffixes.
pub fn lcs(a: &[String], b: &[String]) -> usize {
    fn go(a: &[String], b: &[String], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Two passes: squared errors first, then their mean.
pub fn rmse(preds: &[f64], refs: &[f64]) -> f64 {
    let sq: Vec<f64> = preds.iter().zip(refs).map(|(p, r)| (p - r).powi(2)).collect();
    let mean = sq.iter().sum::<f64>() / sq.len() as f64;
    mean.sqrt()
}

/// Deterministic stream of pseudo-random numbers for fixtures.
pub struct Stream(u64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = splitmix64(self.0);
        self.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64) < p
    }
}

pub const TOPICS: [&str; 3] = ["physics", "biology", "economics"];

/// An undirected citation-style graph: every node has a `topic` label, a
/// `title` and a `year`; edges carry an integer `weight`.
pub fn citation_graph(n: usize, p: f64, seed: u64) -> AttributedGraph {
    let mut s = Stream::new(seed);
    let words = ["study", "method", "notes", "model", "survey", "data", "review", "theory"];
    let mut b = GraphBuilder::undirected().graph_attr("name", "citations");
    for i in 0..n {
        let title = format!("{} {} {i}", words[s.below(words.len())], words[s.below(words.len())]);
        b.add_node(attrs([
            ("topic", AttrValue::text(TOPICS[s.below(3)])),
            ("title", AttrValue::text(title)),
            ("year", AttrValue::Int(1990 + s.below(30) as i64)),
        ]));
    }
    for u in 0..n {
        for v in u + 1..n {
            if s.chance(p) {
                b.add_edge(u, v, attrs([("weight", AttrValue::Int(1 + s.below(9) as i64))]));
            }
        }
    }
    b.build().expect("fixture graph is valid")
}

/// Small molecules: graph attr `toxic` (yes/no label) and `solubility` (real),
/// node attr `element`.
pub fn molecule(seed: u64) -> AttributedGraph {
    let mut s = Stream::new(seed);
    let n = 4 + s.below(5);
    let mut b = GraphBuilder::undirected()
        .graph_attr("toxic", if s.chance(0.5) { "yes" } else { "no" })
        .graph_attr("solubility", AttrValue::Real((s.below(1000) as f64) / 100.0 - 5.0));
    for _ in 0..n {
        b.add_node(attrs([("element", ["C", "N", "O", "S"][s.below(4)])]));
    }
    for v in 1..n {
        b.add_edge(s.below(v), v, attrs([("bond", AttrValue::Int(1 + s.below(2) as i64))]));
    }
    b.build().expect("fixture graph is valid")
}

const NAMES: [&str; 8] = ["color", "weight", "label", "score", "name", "flag", "x_1", "Title"];
const TEXTS: [&str; 22] = [
    "", " lead", "trail ", "a|b", "back\\slash", "quote\"d", "\"start", "12", "1.5", "true", "none",
    "unicode \u{fc} \u{3bb}", "<xml> & 'apos'", "#hash", "[bracket]", "e", "1e5", "-", "red", "two words",
    "-0", "1.0e20",
];

fn random_value(s: &mut Stream) -> AttrValue {
    match s.below(4) {
        0 => AttrValue::Int([0, 1, -7, 42, i64::MAX, i64::MIN, 1990][s.below(7)]),
        1 => AttrValue::Real([2.0, -0.5, 1e20, 1.5e-7, 0.1 + 0.2, -0.0, 123456.789][s.below(7)]),
        2 => AttrValue::Bool(s.chance(0.5)),
        _ => AttrValue::text(TEXTS[s.below(TEXTS.len())]),
    }
}

fn random_attrs(s: &mut Stream, max: usize) -> forge_core::graph::AttrMap {
    let k = s.below(max + 1);
    (0..k).map(|_| (NAMES[s.below(NAMES.len())].to_string(), random_value(s))).collect()
}

/// Random attributed graph with every value kind, awkward text, optional
/// direction, parallel edges and self-loops.
pub fn random_attributed_graph(seed: u64) -> AttributedGraph {
    let mut s = Stream::new(seed);
    let multi = s.chance(0.2);
    let loops = s.chance(0.2);
    let directed = s.chance(0.5);
    let mut b = GraphBuilder::new(directed);
    if multi {
        b = b.graph_attr(forge_core::graph::MULTIGRAPH_FLAG, true);
    }
    if loops {
        b = b.graph_attr(forge_core::graph::SELF_LOOPS_FLAG, true);
    }
    for (k, v) in random_attrs(&mut s, 2) {
        b = b.graph_attr(&k, v);
    }
    let n = s.below(9);
    for _ in 0..n {
        let a = random_attrs(&mut s, 3);
        b.add_node(a);
    }
    if n > 0 {
        let mut seen = BTreeSet::new();
        for _ in 0..s.below(2 * n + 1) {
            let (u, v) = (s.below(n), s.below(n));
            if u == v && !loops {
                continue;
            }
            let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
            if !multi && !seen.insert(key) {
                continue;
            }
            let mut a = random_attrs(&mut s, 2);
            if a.contains_key("weight") {
                let w = if s.chance(0.5) { AttrValue::Int(1 + s.below(9) as i64) } else { AttrValue::Real(0.5) };
                a.insert("weight".into(), w);
            }
            b.add_edge(u, v, a);
        }
    }
    b.build().expect("random graph respects its flags")
}

#[cfg(test)]
mod tests {
    use super::*;
    use forge_core::graph::from_edges;

    #[test]
    fn oracles_on_small_cases() {
        let path = from_edges(4, false, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert!(has_hamilton_path(&path));
        assert!(has_nontrivial_automorphism(&path));
        assert_eq!(shortest_path_length(&path, 0, 3), Some(3));
        let star = from_edges(4, false, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!(!has_hamilton_path(&star));
        assert_eq!(degree(&star, 0), 3);
        let tri = from_edges(3, false, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert!(subgraph_exists(&tri, &path.induced(&[0, 1, 2], Default::default())));
        assert!(!subgraph_exists(&path, &tri));
        assert_eq!(max_triangle_sum(&tri), Some(0));
        let words = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        assert_eq!(lcs(&words("the cat sat"), &words("the cat")), 2);
    }
}
