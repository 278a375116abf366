//! Direct constructors for the graph-structure families.

use rand::seq::SliceRandom;
use rand::Rng;

use super::solve::StructureFamily;
use crate::graph::NodeId;

/// Smallest node count at which each family is distinguishable from the
/// families ranked before it.
pub fn min_nodes(family: StructureFamily) -> usize {
    match family {
        StructureFamily::Cycle => 3,
        StructureFamily::Path => 2,
        StructureFamily::Star => 4,
        StructureFamily::Complete => 4,
        StructureFamily::Tree => 5,
        StructureFamily::BipartiteComplete => 5,
        StructureFamily::General => 4,
    }
}

/// Edge list of a member of `family` on `n` nodes, before relabelling.
/// `General` draws an ER graph at density `p` and may land in another family;
/// callers check the classification.
pub fn family_edges<R: Rng>(
    family: StructureFamily,
    n: usize,
    p: f64,
    rng: &mut R,
) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    match family {
        StructureFamily::Cycle => {
            for i in 0..n {
                edges.push((i, (i + 1) % n));
            }
        }
        StructureFamily::Path => {
            for i in 1..n {
                edges.push((i - 1, i));
            }
        }
        StructureFamily::Star => {
            for i in 1..n {
                edges.push((0, i));
            }
        }
        StructureFamily::Complete => {
            for i in 0..n {
                for j in i + 1..n {
                    edges.push((i, j));
                }
            }
        }
        StructureFamily::Tree => {
            // random recursive tree
            for i in 1..n {
                edges.push((rng.gen_range(0..i), i));
            }
        }
        StructureFamily::BipartiteComplete => {
            let a = rng.gen_range(2..=n - 2);
            for i in 0..a {
                for j in a..n {
                    edges.push((i, j));
                }
            }
        }
        StructureFamily::General => {
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
        }
    }
    edges
}

/// Applies a uniformly random relabelling and shuffles edge order.
pub fn relabel<R: Rng>(n: usize, edges: &[(NodeId, NodeId)], rng: &mut R) -> Vec<(NodeId, NodeId)> {
    let mut perm: Vec<NodeId> = (0..n).collect();
    perm.shuffle(rng);
    let mut out: Vec<(NodeId, NodeId)> = edges
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (perm[u], perm[v]);
            (a.min(b), a.max(b))
        })
        .collect();
    out.sort_unstable();
    out
}
