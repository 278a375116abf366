//! parse(render(g, f)) == g for every format, on random attributed graphs.

use forge_core::graph::{attrs, load_graph, save_graph, AttrValue, AttributedGraph, GraphBuilder};
use forge_core::text::{parse_graph_text, render_graph_text, FormatKind, FormatSpec};
use forge_oracles::random_attributed_graph;
use proptest::prelude::*;

fn roundtrip(g: &AttributedGraph) -> Result<(), String> {
    for kind in FormatKind::ALL {
        for spec in [FormatSpec::new(kind), FormatSpec::compact(kind)] {
            let text = render_graph_text(g, &spec).map_err(|e| format!("{kind}: render: {e}"))?;
            let back = parse_graph_text(&text, &spec).map_err(|e| format!("{kind}: parse: {e}\n{text}"))?;
            if &back != g {
                return Err(format!("{kind}: structural mismatch\n{text}"));
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_graphs_roundtrip(seed in any::<u64>()) {
        let g = random_attributed_graph(seed);
        prop_assert_eq!(roundtrip(&g), Ok(()));
    }

    #[test]
    fn arbitrary_text_values_roundtrip(s in "[^\\p{Cc}]{0,24}", t in "[^\\p{Cc}]{0,8}") {
        let mut b = GraphBuilder::undirected().graph_attr("note", AttrValue::text(t.clone()));
        b.add_node(attrs([("label", AttrValue::text(s.clone()))]));
        b.add_node(attrs([("label", AttrValue::text(t))]));
        b.add_edge(0, 1, attrs([("label", AttrValue::text(s))]));
        prop_assert_eq!(roundtrip(&b.build().unwrap()), Ok(()));
    }

    #[test]
    fn numbers_keep_their_kind(i in any::<i64>(), r in any::<f64>().prop_filter("finite", |r| r.is_finite())) {
        let mut b = GraphBuilder::new(true);
        b.add_node(attrs([("x", AttrValue::Int(i)), ("y", AttrValue::Real(r))]));
        prop_assert_eq!(roundtrip(&b.build().unwrap()), Ok(()));
    }
}

#[test]
fn canonical_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..200 {
        let g = random_attributed_graph(seed);
        let path = dir.path().join(format!("{seed}.json"));
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
    }
}
