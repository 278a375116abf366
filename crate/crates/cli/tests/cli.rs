//! Exercises the `forge` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge")).args(args).output().unwrap()
}

fn smoke() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke/suite.json")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_file() {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    out
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gold_preds(corpus: &Path, split: &str, out: &Path) {
    let text: String = lines(&corpus.join(format!("{split}.jsonl")))
        .iter()
        .map(|v| json!({"id": v["id"], "prediction": v["output"]}).to_string() + "\n")
        .collect();
    std::fs::write(out, text).unwrap();
}

#[test]
fn smoke_suite_builds_to_the_configured_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    ok(&forge(&["build", "--config", s(&smoke()), "--out", s(&out)]));
    let config: Value = serde_json::from_str(&std::fs::read_to_string(smoke()).unwrap()).unwrap();
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let datasets = manifest["datasets"].as_object().unwrap();
    let configured = config["tasks"].as_array().unwrap().len() + config["semantic"].as_array().unwrap().len();
    assert_eq!(datasets.len(), configured);
    for (name, d) in datasets {
        for split in ["train", "valid", "test"] {
            assert_eq!(d["instances"][split], config["split"][split], "{name} {split}");
        }
    }
    for split in ["train", "valid", "test"] {
        let n = lines(&out.join(format!("{split}.jsonl"))).len();
        assert_eq!(manifest["splits"][split], json!(n));
    }
    // bit-exact key set of every record
    for v in lines(&out.join("valid.jsonl")) {
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["id", "task", "level", "format", "split", "input", "output", "meta"]);
    }
}

#[test]
fn generate_then_augment() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let aug = dir.path().join("aug");
    ok(&forge(&["generate", "--config", s(&smoke()), "--out", s(&gen)]));
    let instances = lines(&gen.join("instances.jsonl"));
    // 11 tasks of 35 instances, 60 citation nodes, 40 molecules
    assert_eq!(instances.len(), 11 * 35 + 60 + 40);
    ok(&forge(&["augment", "--plan", s(&smoke()), "--in", s(&gen), "--out", s(&aug)]));
    let samples = lines(&aug.join("samples.jsonl"));
    let formats = samples.iter().filter(|v| v["meta"]["augmentation"] == "format").count();
    let tae = samples.iter().filter(|v| v["meta"]["augmentation"] == "tae").count();
    assert_eq!(formats, 4 * instances.len());
    assert_eq!(tae, instances.len());
    assert!(samples.iter().all(|v| v["split"] == "unassigned"));

    // a bare plan works too
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, r#"{"formats": [{"kind": "markdown"}], "tae": false, "fmae": {"enabled": false}}"#).unwrap();
    let single = dir.path().join("single");
    ok(&forge(&["augment", "--plan", s(&plan), "--in", s(&gen), "--out", s(&single)]));
    assert_eq!(lines(&single.join("samples.jsonl")).len(), instances.len());
}

#[test]
fn same_seed_same_bytes_other_seed_other_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let [a, b, c] = ["a", "b", "c"].map(|n| dir.path().join(n));
    ok(&forge(&["build", "--config", s(&smoke()), "--out", s(&a), "--jobs", "1"]));
    ok(&forge(&["build", "--config", s(&smoke()), "--out", s(&b), "--jobs", "3"]));
    ok(&forge(&["--seed", "99", "build", "--config", s(&smoke()), "--out", s(&c)]));
    assert_eq!(tree(&a), tree(&b));
    assert_ne!(tree(&a)["test.jsonl"], tree(&c)["test.jsonl"]);
}

#[test]
fn unknown_flag_prints_usage() {
    let out = forge(&["build", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn version_lists_schema_and_templates() {
    let v = ok(&forge(&["--version"]));
    assert!(v.contains("forge-corpus-1") && v.contains("template pack"), "{v}");
}

#[test]
fn config_errors_come_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"tasks": [{"kind": "DegreeCount", "count": 5, "colour": "red"}]}"#).unwrap();
    let out_dir = dir.path().join("never");
    let out = forge(&["build", "--config", s(&bad), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[config]: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
    assert!(!out_dir.exists());

    let missing = dir.path().join("missing.json");
    std::fs::write(
        &missing,
        r#"{"semantic": [{"name": "x", "graph_file": "nowhere.json", "task_level": "node",
            "task_type": "multiclass", "target_attr": "y", "description": "d"}]}"#,
    )
    .unwrap();
    let out = forge(&["build", "--config", s(&missing), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_dir.exists());
}

#[test]
fn shortfall_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.json");
    std::fs::write(&cfg, r#"{"split": {"train": 5, "valid": 2, "test": 3}, "tasks": [{"kind": "DegreeCount", "count": 9}]}"#).unwrap();
    let out = forge(&["build", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[data]: ") && err.contains("short by 1"), "{err}");
}

#[test]
fn eval_writes_report_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&forge(&["build", "--config", s(&smoke()), "--out", s(&corpus)]));
    let preds = dir.path().join("preds.jsonl");
    gold_preds(&corpus, "valid", &preds);
    let table = ok(&forge(&["eval", "--corpus", s(&corpus), "--split", "valid", "--preds", s(&preds)]));
    assert!(table.contains("all [accuracy]"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["aggregate"]["accuracy"]["value"], json!(1.0));
    assert!(report["rouge_tokenization"].is_string());

    let stray = dir.path().join("stray.jsonl");
    std::fs::write(&stray, "{\"id\": \"not-a-sample\", \"prediction\": \"1\"}\n").unwrap();
    let out = forge(&["eval", "--corpus", s(&corpus), "--split", "valid", "--preds", s(&stray)]);
    assert_eq!(out.status.code(), Some(5));
    let out = forge(&["eval", "--corpus", s(&corpus), "--split", "dev", "--preds", s(&stray)]);
    assert_eq!(out.status.code(), Some(2));
}

/// Alphanumeric runs are one token; any other visible character is one token.
fn recount(text: &str) -> usize {
    let mut n = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if !in_word {
                n += 1;
            }
            in_word = true;
        } else {
            in_word = false;
            if !c.is_whitespace() {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn format_report_rows_and_token_means() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&forge(&["build", "--config", s(&smoke()), "--out", s(&corpus)]));
    let json_path = dir.path().join("fmt.json");
    let table = ok(&forge(&["format-report", "--corpus", s(&corpus), "--json", s(&json_path)]));
    assert_eq!(table.lines().count(), 2 + 4, "{table}");
    assert!(!table.contains("accuracy"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let test = lines(&corpus.join("test.jsonl"));
    for row in report["formats"].as_array().unwrap() {
        let members: Vec<&Value> = test.iter().filter(|v| v["format"] == row["format"]).collect();
        let mean = members.iter().map(|v| recount(v["input"].as_str().unwrap())).sum::<usize>() as f64 / members.len() as f64;
        assert!((row["mean_input_tokens"].as_f64().unwrap() - mean).abs() < 1e-9, "{}", row["format"]);
    }

    let preds = dir.path().join("preds.jsonl");
    gold_preds(&corpus, "test", &preds);
    let table = ok(&forge(&["format-report", "--corpus", s(&corpus), "--preds", s(&preds)]));
    assert!(table.lines().next().unwrap().contains("accuracy"));
    assert!(table.lines().skip(2).all(|l| l.trim_end().ends_with("1.0000")), "{table}");
}

#[test]
fn format_report_needs_two_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("one.json");
    std::fs::write(
        &cfg,
        r#"{"split": {"train": 3, "valid": 1, "test": 2},
            "augment": {"formats": [{"kind": "gml"}], "tae": false, "fmae": {"enabled": false}},
            "tasks": [{"kind": "DegreeCount", "count": 6}]}"#,
    )
    .unwrap();
    let corpus = dir.path().join("c");
    ok(&forge(&["build", "--config", s(&cfg), "--out", s(&corpus)]));
    let out = forge(&["format-report", "--corpus", s(&corpus)]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn infer_refuses_inline_keys_and_missing_variables() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    ok(&forge(&["build", "--config", s(&smoke()), "--out", s(&corpus)]));
    let ep = dir.path().join("ep.json");
    std::fs::write(&ep, r#"{"base_url": "http://127.0.0.1:9/v1", "model": "m", "api_key": "sk-inline"}"#).unwrap();
    let out = forge(&["infer", "--corpus", s(&corpus), "--endpoint", s(&ep), "--out", s(&dir.path().join("p.jsonl"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&out.stderr).contains("sk-inline"));

    std::fs::write(&ep, r#"{"base_url": "http://127.0.0.1:9/v1", "model": "m", "api_key_env": "FORGE_CLI_TEST_UNSET_KEY"}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(["infer", "--corpus", s(&corpus), "--endpoint", s(&ep), "--out", s(&dir.path().join("p.jsonl"))])
        .env_remove("FORGE_CLI_TEST_UNSET_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FORGE_CLI_TEST_UNSET_KEY"));
}
