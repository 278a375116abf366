//! End-to-end: config → split → augment → emit → reload → self-evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use forge_core::augment::{make_tae_task, mask_count, mask_graph, mask_population, MaskElement, MASK_TOKEN};
use forge_core::dataset::{Corpus, DatasetError, Split};
use forge_core::eval::{evaluate, EvalOptions, Prediction};
use forge_core::graph::{save_graph, AttrValue};
use forge_core::sample::Augmentation;
use forge_core::suite::Suite;
use forge_core::task::{CanonicalAnswer, Metric};
use forge_core::text::{parse_graph_text, split_sections, FormatKind, FormatSpec};
use forge_oracles::{citation_graph, molecule, neighbors, random_attributed_graph, Stream};

const CONFIG: &str = r#"{
  "seed": 11,
  "split": {"train": 12, "valid": 4, "test": 6},
  "tasks": [
    {"kind": "DegreeCount", "count": 30},
    {"kind": "ShortestPath", "count": 24},
    {"kind": "AttributeRetrieval-Node", "count": 22}
  ],
  "semantic": [
    {"name": "cite", "graph_file": "cite.json", "task_level": "node", "task_type": "multiclass",
     "target_attr": "topic", "ego_radius": 1, "description": "Papers and the citations between them."},
    {"name": "sol", "graph_file": "mols", "task_level": "graph", "task_type": "regression",
     "target_attr": "solubility", "description": "A small molecule."}
  ]
}"#;

fn fixture(dir: &Path) -> Suite {
    save_graph(&citation_graph(40, 0.08, 2), dir.join("cite.json")).unwrap();
    std::fs::create_dir_all(dir.join("mols")).unwrap();
    for i in 0..30 {
        save_graph(&molecule(100 + i), dir.join("mols").join(format!("m{i:02}.json"))).unwrap();
    }
    std::fs::write(dir.join("suite.json"), CONFIG).unwrap();
    Suite::load(&dir.join("suite.json")).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn build_emit_reload_and_self_score() {
    let dir = tempfile::tempdir().unwrap();
    let suite = fixture(dir.path());
    let corpus = suite.build().unwrap();

    // instance counts per split are exact for every dataset
    for (name, d) in &corpus.manifest.datasets {
        let want: BTreeMap<String, usize> = [("train", 12), ("valid", 4), ("test", 6)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(d.instances, want, "{name}");
    }

    // four renderings per instance everywhere; self-supervised samples only in train
    let mut per_group: BTreeMap<&str, Vec<Augmentation>> = BTreeMap::new();
    for s in &corpus.samples {
        per_group.entry(&s.meta.group).or_default().push(s.meta.augmentation);
    }
    for s in &corpus.samples {
        let augs = &per_group[s.meta.group.as_str()];
        assert_eq!(augs.iter().filter(|a| **a == Augmentation::Format).count(), 4);
        let ssl = augs.iter().filter(|a| matches!(a, Augmentation::Tae | Augmentation::Fmae)).count();
        if s.split == "train" {
            assert!(ssl >= 1, "{} lacks self-supervised samples", s.meta.group);
        } else {
            assert_eq!(ssl, 0);
        }
    }

    // emission is deterministic and survives reload
    let (a, b) = (dir.path().join("out-a"), dir.path().join("out-b"));
    corpus.emit(&a).unwrap();
    suite.build().unwrap().emit(&b).unwrap();
    assert_eq!(files(&a), files(&b));
    let again = Corpus::load(&a).unwrap();
    assert_eq!(again, corpus);

    // gold outputs score perfectly on every split
    for s in Split::ALL {
        let samples = Corpus::load_split(&a, s).unwrap();
        let preds: Vec<Prediction> = samples
            .iter()
            .map(|x| Prediction {
                id: x.id.clone(),
                prediction: x.output.clone(),
                error: None,
            })
            .collect();
        let report = evaluate(s.name(), &samples, &preds, &EvalOptions::default()).unwrap();
        assert!(report.missing.is_empty());
        for (key, m) in &report.per_task {
            let perfect = match m.metric {
                Metric::Rmse => 0.0,
                _ => 1.0,
            };
            assert_eq!(m.value, perfect, "{s} {key}");
            assert_eq!(m.n_unparseable, 0, "{s} {key}");
        }
    }
}

#[test]
fn held_out_graphs_never_reach_train() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture(dir.path()).build().unwrap();
    let mut held = BTreeSet::new();
    for s in corpus.samples.iter().filter(|s| s.split != "train") {
        if matches!(s.level.as_str(), "entity" | "path" | "structure") {
            held.insert(split_sections(&s.input).unwrap().graph_text.to_string());
        }
    }
    assert!(!held.is_empty());
    for s in corpus.split(Split::Train) {
        assert!(!held.contains(split_sections(&s.input).unwrap().graph_text));
    }
}

#[test]
fn shortfall_names_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let mut suite = fixture(dir.path());
    suite.config.tasks[0].count = 21;
    match suite.build() {
        Err(e @ DatasetError::Shortfall { .. }) => {
            let msg = e.to_string();
            assert!(msg.contains("DegreeCount") && msg.contains("short by 1"), "{msg}");
        }
        other => panic!("expected a shortfall, got {other:?}"),
    }
}

#[test]
fn tampered_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture(dir.path()).build().unwrap();
    let out = dir.path().join("out");
    corpus.emit(&out).unwrap();
    let train = out.join("train.jsonl");
    let text = std::fs::read_to_string(&train).unwrap();
    let first_newline = text.find('\n').unwrap();
    std::fs::write(&train, &text[first_newline + 1..]).unwrap();
    assert!(matches!(Corpus::load(&out), Err(DatasetError::Manifest(_))));
}

#[test]
fn neighbor_listing_matches_oracle() {
    for seed in 0..1000 {
        let g = random_attributed_graph(seed);
        if g.node_count() == 0 {
            continue;
        }
        let t = make_tae_task(&g, "d", seed).unwrap();
        let Some(forge_core::task::Target::Node { id }) = t.target else { panic!() };
        let want = if g.directed() {
            g.edges().iter().filter(|e| e.src == id).map(|e| e.dst).collect()
        } else {
            neighbors(&g, id)
        };
        assert_eq!(t.answer, CanonicalAnswer::node_set(want), "seed {seed}");
    }
}

#[test]
fn masking_hides_exactly_the_drawn_slots() {
    let mut s = Stream::new(77);
    for seed in 0..500 {
        let g = random_attributed_graph(seed);
        let pop = mask_population(&g);
        let rate = [0.1, 0.2, 0.5, 1.0][s.below(4)];
        let Ok(m) = mask_graph(&g, rate, seed) else {
            assert!(pop.is_empty());
            continue;
        };
        let oracle_k = ((rate * pop.len() as f64) - 1e-9).ceil().max(1.0) as usize;
        assert_eq!(m.masked_targets.len(), oracle_k.min(pop.len()));
        assert_eq!(m.masked_targets.len(), mask_count(rate, pop.len()));
        let hidden: BTreeSet<(MaskElement, String)> =
            m.masked_targets.iter().map(|t| (t.element, t.attr.clone())).collect();
        for (el, attr) in &pop {
            let (before, after) = match el {
                MaskElement::Node { id } => (&g.nodes()[*id].attrs[attr], &m.graph.nodes()[*id].attrs[attr]),
                MaskElement::Edge { index } => (&g.edges()[*index].attrs[attr], &m.graph.edges()[*index].attrs[attr]),
            };
            if hidden.contains(&(*el, attr.clone())) {
                assert_eq!(after, &AttrValue::text(MASK_TOKEN));
            } else {
                assert_eq!(after, before);
            }
        }
    }
}

#[test]
fn masked_value_is_hidden_in_every_format() {
    let g = citation_graph(12, 0.3, 8);
    let m = mask_graph(&g, 0.2, 5).unwrap();
    let probe = m.probe_target();
    for kind in FormatKind::ALL {
        let fmt = FormatSpec::new(kind);
        let text = forge_core::text::render_graph_text(&m.graph, &fmt).unwrap();
        let back = parse_graph_text(&text, &fmt).unwrap();
        let shown = match probe.element {
            MaskElement::Node { id } => back.nodes()[id].attrs[&probe.attr].clone(),
            MaskElement::Edge { index } => back.edges()[index].attrs[&probe.attr].clone(),
        };
        assert_eq!(shown, AttrValue::text(MASK_TOKEN), "{kind}");
    }
}
