//! Exact solvers for the structure tasks.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{AttrValue, AttributedGraph, GraphError, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementRef {
    Node(NodeId),
    /// Edge by index into the edge list.
    Edge(usize),
}

pub fn solve_graph_size(g: &AttributedGraph) -> (usize, usize) {
    (g.node_count(), g.edge_count())
}

pub fn solve_attribute_retrieval(
    g: &AttributedGraph,
    target: ElementRef,
    attr: &str,
) -> Result<AttrValue, GraphError> {
    let attrs = match target {
        ElementRef::Node(v) => &g.node(v)?.attrs,
        ElementRef::Edge(i) => &g.edge(i)?.attrs,
    };
    attrs.get(attr).cloned().ok_or_else(|| GraphError::InvalidAttr {
        name: attr.to_string(),
        message: format!("not present on {target:?}"),
    })
}

pub fn solve_degree(g: &AttributedGraph, v: NodeId) -> Result<usize, GraphError> {
    g.degree(v)
}

/// Integer weight of an edge; unweighted edges count 1.
pub(crate) fn edge_weight(g: &AttributedGraph, index: usize) -> i64 {
    g.edges()[index]
        .attrs
        .get("weight")
        .and_then(AttrValue::as_i64)
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPath {
    pub length: i64,
    pub path: Vec<NodeId>,
}

/// Dijkstra over integer weights (hop counts when unweighted), following edge
/// direction in directed graphs. `None` when `t` is unreachable.
pub fn solve_shortest_path(
    g: &AttributedGraph,
    s: NodeId,
    t: NodeId,
) -> Result<Option<ShortestPath>, GraphError> {
    g.node(s)?;
    g.node(t)?;
    let n = g.node_count();
    let mut dist = vec![i64::MAX; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0;
    heap.push(Reverse((0i64, s)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if u == t {
            break;
        }
        for i in g.incident_edges(u)? {
            let e = &g.edges()[i];
            let v = if g.directed() {
                if e.src != u {
                    continue;
                }
                e.dst
            } else {
                e.other(u).expect("incident edge")
            };
            let nd = d + edge_weight(g, i);
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    if dist[t] == i64::MAX {
        return Ok(None);
    }
    let mut path = vec![t];
    let mut cur = t;
    while cur != s {
        cur = prev[cur];
        path.push(cur);
    }
    path.reverse();
    Ok(Some(ShortestPath {
        length: dist[t],
        path,
    }))
}

/// Maximum node-weight sum over all triangles; `None` when the graph has none.
/// Enumerates each triangle once as an edge plus a common higher-numbered neighbour.
pub fn solve_max_triangle_sum(g: &AttributedGraph) -> Option<i64> {
    let adj = g.adjacency();
    let weight = |v: NodeId| {
        g.nodes()[v]
            .attrs
            .get("weight")
            .and_then(AttrValue::as_i64)
            .unwrap_or(0)
    };
    let mut best: Option<i64> = None;
    for u in 0..g.node_count() {
        for &v in adj[u].iter().filter(|&&v| v > u) {
            // common neighbours w > v by sorted merge
            let (mut i, mut j) = (0, 0);
            let (a, b) = (&adj[u], &adj[v]);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        let w = a[i];
                        if w > v {
                            let sum = weight(u) + weight(v) + weight(w);
                            best = Some(best.map_or(sum, |b| b.max(sum)));
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
    }
    best
}

/// Backtracking Hamiltonian-path search (undirected view) with degree pruning.
/// Returns a witness when one exists.
pub fn solve_hamilton_path(g: &AttributedGraph) -> Option<Vec<NodeId>> {
    let n = g.node_count();
    if n == 0 {
        return None;
    }
    if n == 1 {
        return Some(vec![0]);
    }
    let adj = g.adjacency();
    if adj.iter().any(Vec::is_empty) || !is_connected(&adj) {
        return None;
    }
    let leaves: Vec<NodeId> = (0..n).filter(|&v| adj[v].len() == 1).collect();
    if leaves.len() > 2 {
        return None;
    }
    // a degree-1 node must be an endpoint
    let starts: Vec<NodeId> = if leaves.is_empty() {
        (0..n).collect()
    } else {
        leaves
    };
    let mut path = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for s in starts {
        path.push(s);
        visited[s] = true;
        if extend_path(&adj, &mut path, &mut visited) {
            return Some(path);
        }
        path.pop();
        visited[s] = false;
    }
    None
}

fn extend_path(adj: &[Vec<NodeId>], path: &mut Vec<NodeId>, visited: &mut [bool]) -> bool {
    if path.len() == adj.len() {
        return true;
    }
    let u = *path.last().expect("nonempty path");
    for &v in &adj[u] {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        path.push(v);
        if !strands_node(adj, visited, v) && extend_path(adj, path, visited) {
            return true;
        }
        path.pop();
        visited[v] = false;
    }
    false
}

/// After moving to `head`, an unvisited node with no unvisited neighbour other
/// than possibly the head can only be the final node; two such nodes is a dead end.
fn strands_node(adj: &[Vec<NodeId>], visited: &[bool], head: NodeId) -> bool {
    let mut dead_ends = 0;
    for v in 0..adj.len() {
        if visited[v] {
            continue;
        }
        let free = adj[v].iter().filter(|&&w| !visited[w]).count();
        let touches_head = adj[v].contains(&head);
        if free == 0 && !touches_head {
            return true;
        }
        if free == 0 || (free == 1 && !touches_head) {
            dead_ends += 1;
        }
    }
    dead_ends > 1
}

pub(crate) fn is_connected(adj: &[Vec<NodeId>]) -> bool {
    if adj.is_empty() {
        return true;
    }
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adj.len()
}

/// Non-induced subgraph isomorphism (undirected view): is there an injective
/// map of pattern nodes into `g` sending every pattern edge onto an edge of `g`?
pub fn solve_subgraph_matching(g: &AttributedGraph, pattern: &AttributedGraph) -> bool {
    let k = pattern.node_count();
    if k > g.node_count() {
        return false;
    }
    if k == 0 {
        return true;
    }
    let host = g.adjacency();
    let pat = pattern.adjacency();
    let host_matrix = matrix(&host);
    // visit pattern nodes so that each one after the first touches an earlier one when possible
    let mut order: Vec<NodeId> = Vec::with_capacity(k);
    let mut placed = vec![false; k];
    while order.len() < k {
        let next = (0..k)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| {
                let links = pat[v].iter().filter(|&&w| placed[w]).count();
                (links, pat[v].len(), Reverse(v))
            })
            .expect("unplaced node");
        placed[next] = true;
        order.push(next);
    }
    let mut image = vec![usize::MAX; k];
    let mut used = vec![false; g.node_count()];
    match_next(&host, &host_matrix, &pat, &order, 0, &mut image, &mut used)
}

fn match_next(
    host: &[Vec<NodeId>],
    host_matrix: &[Vec<bool>],
    pat: &[Vec<NodeId>],
    order: &[NodeId],
    depth: usize,
    image: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let p = order[depth];
    for h in 0..host.len() {
        if used[h] || host[h].len() < pat[p].len() {
            continue;
        }
        let consistent = pat[p]
            .iter()
            .all(|&q| image[q] == usize::MAX || host_matrix[h][image[q]]);
        if !consistent {
            continue;
        }
        image[p] = h;
        used[h] = true;
        if match_next(host, host_matrix, pat, order, depth + 1, image, used) {
            return true;
        }
        image[p] = usize::MAX;
        used[h] = false;
    }
    false
}

fn matrix(adj: &[Vec<NodeId>]) -> Vec<Vec<bool>> {
    let mut m = vec![vec![false; adj.len()]; adj.len()];
    for (u, list) in adj.iter().enumerate() {
        for &v in list {
            m[u][v] = true;
        }
    }
    m
}

/// Closed family set for the graph-structure task, in classification priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureFamily {
    Cycle,
    Path,
    Star,
    Complete,
    Tree,
    BipartiteComplete,
    General,
}

impl StructureFamily {
    pub const ALL: [StructureFamily; 7] = [
        StructureFamily::Cycle,
        StructureFamily::Path,
        StructureFamily::Star,
        StructureFamily::Complete,
        StructureFamily::Tree,
        StructureFamily::BipartiteComplete,
        StructureFamily::General,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StructureFamily::Cycle => "cycle",
            StructureFamily::Path => "path",
            StructureFamily::Star => "star",
            StructureFamily::Complete => "complete",
            StructureFamily::Tree => "tree",
            StructureFamily::BipartiteComplete => "bipartite-complete",
            StructureFamily::General => "general",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.label() == s)
    }
}

impl fmt::Display for StructureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Classifies the undirected view of `g`; the first matching family wins.
pub fn solve_graph_structure(g: &AttributedGraph) -> StructureFamily {
    let adj = g.adjacency();
    let n = adj.len();
    let m: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let connected = n > 0 && is_connected(&adj);
    if !connected {
        return StructureFamily::General;
    }
    if n >= 3 && deg.iter().all(|&d| d == 2) {
        return StructureFamily::Cycle;
    }
    let tree = m + 1 == n;
    if n >= 2 && tree && deg.iter().all(|&d| d <= 2) {
        return StructureFamily::Path;
    }
    if n >= 3 && tree && deg.iter().any(|&d| d == n - 1) {
        return StructureFamily::Star;
    }
    if n >= 2 && m == n * (n - 1) / 2 {
        return StructureFamily::Complete;
    }
    if tree {
        return StructureFamily::Tree;
    }
    if let Some(side) = two_coloring(&adj) {
        let a = side.iter().filter(|&&s| s).count();
        if a * (n - a) == m {
            return StructureFamily::BipartiteComplete;
        }
    }
    StructureFamily::General
}

fn two_coloring(adj: &[Vec<NodeId>]) -> Option<Vec<bool>> {
    let mut color: Vec<Option<bool>> = vec![None; adj.len()];
    for s in 0..adj.len() {
        if color[s].is_some() {
            continue;
        }
        color[s] = Some(false);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let cu = color[u].expect("colored");
            for &v in &adj[u] {
                match color[v] {
                    None => {
                        color[v] = Some(!cu);
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu => return None,
                    _ => {}
                }
            }
        }
    }
    Some(color.into_iter().map(|c| c.expect("colored")).collect())
}

/// Does some non-identity node permutation preserve adjacency (undirected view)?
/// Backtracking over degree-compatible images.
pub fn solve_graph_automorphism(g: &AttributedGraph) -> bool {
    find_automorphism(g).is_some()
}

/// A non-identity automorphism as an image vector, if one exists.
pub fn find_automorphism(g: &AttributedGraph) -> Option<Vec<NodeId>> {
    let adj = g.adjacency();
    let n = adj.len();
    if n < 2 {
        return None;
    }
    let m = matrix(&adj);
    // refine candidates by (degree, sorted neighbour degrees)
    let signature: Vec<(usize, Vec<usize>)> = (0..n)
        .map(|v| {
            let mut nd: Vec<usize> = adj[v].iter().map(|&w| adj[w].len()).collect();
            nd.sort_unstable();
            (adj[v].len(), nd)
        })
        .collect();
    let candidates: Vec<Vec<NodeId>> = (0..n)
        .map(|v| (0..n).filter(|&w| signature[w] == signature[v]).collect())
        .collect();
    if candidates.iter().all(|c| c.len() == 1) {
        return None;
    }
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    if auto_next(&m, &candidates, 0, false, &mut image, &mut used) {
        Some(image)
    } else {
        None
    }
}

fn auto_next(
    m: &[Vec<bool>],
    candidates: &[Vec<NodeId>],
    v: NodeId,
    moved: bool,
    image: &mut [usize],
    used: &mut [bool],
) -> bool {
    let n = m.len();
    if v == n {
        return moved;
    }
    for &w in &candidates[v] {
        if used[w] {
            continue;
        }
        if (0..v).any(|u| m[u][v] != m[image[u]][w]) {
            continue;
        }
        image[v] = w;
        used[w] = true;
        if auto_next(m, candidates, v + 1, moved || w != v, image, used) {
            return true;
        }
        used[w] = false;
        image[v] = usize::MAX;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{attrs, from_edges, AttrMap, GraphBuilder};

    fn complete(n: usize) -> AttributedGraph {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j));
            }
        }
        from_edges(n, false, &e).unwrap()
    }

    fn weighted_nodes(weights: &[i64], edges: &[(usize, usize)]) -> AttributedGraph {
        let mut b = GraphBuilder::undirected();
        for &w in weights {
            b.add_node(attrs([("weight", w)]));
        }
        for &(u, v) in edges {
            b.add_edge(u, v, AttrMap::new());
        }
        b.build().unwrap()
    }

    #[test]
    fn graph_size() {
        assert_eq!(solve_graph_size(&complete(4)), (4, 6));
        assert_eq!(solve_graph_size(&from_edges(5, false, &[]).unwrap()), (5, 0));
    }

    #[test]
    fn attribute_retrieval() {
        let mut b = GraphBuilder::undirected();
        b.add_nodes(2);
        b.add_node(attrs([("weight", 7i64)]));
        b.add_edge(0, 1, attrs([("weight", 3i64)]));
        let g = b.build().unwrap();
        assert_eq!(
            solve_attribute_retrieval(&g, ElementRef::Node(2), "weight").unwrap(),
            AttrValue::Int(7)
        );
        assert_eq!(
            solve_attribute_retrieval(&g, ElementRef::Edge(0), "weight").unwrap(),
            AttrValue::Int(3)
        );
        assert!(solve_attribute_retrieval(&g, ElementRef::Node(0), "weight").is_err());
    }

    #[test]
    fn shortest_path_cases() {
        let mut b = GraphBuilder::undirected();
        b.add_nodes(3);
        b.add_edge(0, 1, attrs([("weight", 1i64)]))
            .add_edge(1, 2, attrs([("weight", 1i64)]))
            .add_edge(0, 2, attrs([("weight", 3i64)]));
        let g = b.build().unwrap();
        let sp = solve_shortest_path(&g, 0, 2).unwrap().unwrap();
        assert_eq!(sp.length, 2);
        assert_eq!(sp.path, vec![0, 1, 2]);
        let same = solve_shortest_path(&g, 1, 1).unwrap().unwrap();
        assert_eq!((same.length, same.path), (0, vec![1]));
        let apart = from_edges(3, false, &[(0, 1)]).unwrap();
        assert_eq!(solve_shortest_path(&apart, 0, 2).unwrap(), None);
        let directed = from_edges(2, true, &[(1, 0)]).unwrap();
        assert_eq!(solve_shortest_path(&directed, 0, 1).unwrap(), None);
    }

    #[test]
    fn triangle_sums() {
        let tri = weighted_nodes(&[2, 3, 4], &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(solve_max_triangle_sum(&tri), Some(9));
        let k4 = weighted_nodes(
            &[1, 2, 3, 4],
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        );
        assert_eq!(solve_max_triangle_sum(&k4), Some(9));
        let path = weighted_nodes(&[1, 1, 1], &[(0, 1), (1, 2)]);
        assert_eq!(solve_max_triangle_sum(&path), None);
    }

    #[test]
    fn hamilton_cases() {
        let p3 = from_edges(3, false, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(solve_hamilton_path(&p3), Some(vec![0, 1, 2]));
        let star = from_edges(4, false, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(solve_hamilton_path(&star), None);
        assert!(solve_hamilton_path(&complete(6)).is_some());
        assert_eq!(solve_hamilton_path(&from_edges(1, false, &[]).unwrap()), Some(vec![0]));
    }

    #[test]
    fn subgraph_cases() {
        let tri = complete(3);
        assert!(solve_subgraph_matching(&complete(4), &tri));
        let tree = from_edges(6, false, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]).unwrap();
        assert!(!solve_subgraph_matching(&tree, &tri));
        let p3 = from_edges(3, false, &[(0, 1), (1, 2)]).unwrap();
        assert!(solve_subgraph_matching(&tree, &p3));
        assert!(!solve_subgraph_matching(&tri, &complete(4)));
    }

    #[test]
    fn structure_cases() {
        let c5 = from_edges(5, false, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        assert_eq!(solve_graph_structure(&c5), StructureFamily::Cycle);
        assert_eq!(solve_graph_structure(&complete(4)), StructureFamily::Complete);
        assert_eq!(solve_graph_structure(&complete(3)), StructureFamily::Cycle);
        let star = from_edges(5, false, &[(2, 0), (2, 1), (2, 3), (2, 4)]).unwrap();
        assert_eq!(solve_graph_structure(&star), StructureFamily::Star);
        let k23 = from_edges(5, false, &[(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]).unwrap();
        assert_eq!(solve_graph_structure(&k23), StructureFamily::BipartiteComplete);
        let tree = from_edges(6, false, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]).unwrap();
        assert_eq!(solve_graph_structure(&tree), StructureFamily::Tree);
        let disconnected = from_edges(4, false, &[(0, 1)]).unwrap();
        assert_eq!(solve_graph_structure(&disconnected), StructureFamily::General);
    }

    #[test]
    fn automorphism_cases() {
        assert!(!solve_graph_automorphism(&from_edges(1, false, &[]).unwrap()));
        let p3 = from_edges(3, false, &[(0, 1), (1, 2)]).unwrap();
        assert!(solve_graph_automorphism(&p3));
        // smallest asymmetric graph: 6 nodes
        let asym = from_edges(6, false, &[(0, 1), (1, 2), (2, 3), (3, 4), (2, 4), (4, 5)]).unwrap();
        assert!(!solve_graph_automorphism(&asym));
    }
}
