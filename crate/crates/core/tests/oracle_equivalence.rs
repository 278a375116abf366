//! Solver answers against brute-force oracles on generated instances.

use forge_core::task::TaskKind;
use forge_oracles::checks::{solver_mismatches, verifier_soundness};

fn agree(kind: TaskKind, count: usize) {
    let bad = solver_mismatches(kind, count, 0x5eed ^ kind as u64).unwrap();
    assert!(bad.is_empty(), "{kind}: {} mismatches, first: {:?}", bad.len(), bad.first());
}

#[test]
fn attribute_retrieval_node() {
    agree(TaskKind::AttributeRetrievalNode, 1000);
}

#[test]
fn attribute_retrieval_edge() {
    agree(TaskKind::AttributeRetrievalEdge, 1000);
}

#[test]
fn degree_count() {
    agree(TaskKind::DegreeCount, 1000);
}

#[test]
fn shortest_path() {
    agree(TaskKind::ShortestPath, 1000);
}

#[test]
fn max_triangle_sum() {
    agree(TaskKind::MaximumTriangleSum, 1000);
}

#[test]
fn hamilton_path() {
    agree(TaskKind::HamiltonPath, 1000);
}

#[test]
fn subgraph_matching() {
    agree(TaskKind::SubgraphMatching, 1000);
}

#[test]
fn graph_structure() {
    agree(TaskKind::GraphStructure, 1000);
}

#[test]
fn graph_automorphism() {
    agree(TaskKind::GraphAutomorphism, 1000);
}

#[test]
fn graph_size() {
    agree(TaskKind::GraphSizeNode, 200);
    agree(TaskKind::GraphSizeEdge, 200);
}

#[test]
fn path_verifiers_are_sound() {
    let s = verifier_soundness(100, 11).unwrap();
    assert!(s.failures.is_empty(), "{:?}", &s.failures[..s.failures.len().min(5)]);
    assert_eq!(s.perturbed, 200);
    assert_eq!(s.alternatives, 200);
}
