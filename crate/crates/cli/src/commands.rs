//! Command bodies and the mapping from library errors to error categories.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use forge_client::{run_inference_blocking, ClientError, EndpointConfig, RunPaths};
use forge_core::augment::{AugmentError, AugmentPlan};
use forge_core::dataset::corpus::{read_jsonl, write_jsonl, MANIFEST_FILE};
use forge_core::dataset::{Corpus, DatasetError, Split};
use forge_core::eval::{evaluate, read_predictions, render_table, EvalError, EvalOptions};
use forge_core::sample::{Augmentation, InstructionSample};
use forge_core::suite::{augment_records, InstanceRecord, Suite, SuiteConfig};
use forge_core::synth::GenError;
use forge_core::task::Metric;
use forge_core::text::templates::TemplatePack;
use forge_core::text::{count_tokens, split_sections, FormatKind};

pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const SAMPLES_FILE: &str = "samples.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Config,
    Io,
    Data,
    Endpoint,
    Auth,
    Internal,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Config => "config",
            Category::Io => "io",
            Category::Data => "data",
            Category::Endpoint => "endpoint",
            Category::Auth => "auth",
            Category::Internal => "internal",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Category::Usage => 2,
            Category::Config => 3,
            Category::Io => 4,
            Category::Data => 5,
            Category::Endpoint => 6,
            Category::Auth => 7,
            Category::Internal => 70,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn msg(category: Category, message: impl Into<String>) -> Self {
        CliError {
            category,
            message: message.into(),
        }
    }

    /// `error[<category>]: <message>` on one line.
    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}]: {}", self.category.name(), flat.join(" "))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::msg(Category::Io, format!("{}: {e}", path.display()))
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let category = match &e {
            DatasetError::Config(_)
            | DatasetError::Gen(GenError::Config(_))
            | DatasetError::Augment(AugmentError::Plan(_)) => Category::Config,
            DatasetError::Io { .. } => Category::Io,
            _ => Category::Data,
        };
        CliError::msg(category, e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Dataset(d) => d.into(),
            EvalError::Io { .. } => CliError::msg(Category::Io, e.to_string()),
            e => CliError::msg(Category::Data, e.to_string()),
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        let category = match &e {
            ClientError::Config(_) | ClientError::MissingKey(_) => Category::Config,
            ClientError::Io { .. } => Category::Io,
            ClientError::Malformed { .. } => Category::Data,
            ClientError::Auth { .. } => Category::Auth,
            ClientError::Http(_) => Category::Endpoint,
        };
        CliError::msg(category, e.to_string())
    }
}

/// Loads a suite; any problem with the file itself is a config error.
fn load_suite(path: &Path, seed: Option<u64>) -> Result<Suite, CliError> {
    let mut suite = Suite::load(path).map_err(|e| match e {
        DatasetError::Io { .. } => CliError::from(e),
        e => CliError::msg(Category::Config, e.to_string()),
    })?;
    if let Some(s) = seed {
        suite.config.seed = s;
    }
    for s in &suite.config.semantic {
        let p = suite.base.join(&s.graph_file);
        if !p.exists() {
            return Err(CliError::msg(
                Category::Config,
                format!("{}: graph_file {} does not exist", s.name, p.display()),
            ));
        }
    }
    if let Some(t) = &suite.config.templates {
        let p = suite.base.join(t);
        if !p.exists() {
            return Err(CliError::msg(Category::Config, format!("template pack {} does not exist", p.display())));
        }
    }
    Ok(suite)
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(v).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn parse_split(name: &str) -> Result<Split, CliError> {
    Split::from_name(name).ok_or_else(|| CliError::msg(Category::Usage, format!("unknown split {name:?}; use train, valid or test")))
}

fn load_split(corpus: &Path, split: &str) -> Result<Vec<InstructionSample>, CliError> {
    let s = parse_split(split)?;
    let manifest = corpus.join(MANIFEST_FILE);
    if !manifest.exists() {
        return Err(CliError::msg(
            Category::Io,
            format!("{} is not a corpus: {MANIFEST_FILE} is missing", corpus.display()),
        ));
    }
    Ok(Corpus::load_split(corpus, s)?)
}

pub fn generate(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let suite = load_suite(config, seed)?;
    let records = suite.generate()?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &records {
        *counts.entry(&r.dataset).or_default() += 1;
    }
    write_jsonl(&out.join(INSTANCES_FILE), &records)?;
    write_json(
        &out.join("generate.json"),
        &json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "config_hash": suite.config_hash(),
            "seed": suite.config.seed,
            "datasets": counts,
        }),
    )?;
    println!("wrote {} instances of {} datasets to {}", records.len(), counts.len(), out.display());
    Ok(())
}

/// Plan, template pack and seed from either a bare plan or a suite config.
fn load_plan(path: &Path) -> Result<(AugmentPlan, TemplatePack, u64), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |e: serde_json::Error| CliError::msg(Category::Config, format!("{}: {e}", path.display()));
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    let is_suite = ["augment", "tasks", "semantic", "split", "templates"]
        .iter()
        .any(|k| raw.get(k).is_some());
    let (plan, pack, seed) = if is_suite {
        let config: SuiteConfig = serde_json::from_value(raw).map_err(bad)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let suite = Suite::new(config, base).map_err(|e| CliError::msg(Category::Config, e.to_string()))?;
        let pack = suite.template_pack().map_err(|e| CliError::msg(Category::Config, e.to_string()))?;
        (suite.config.augment.clone(), pack, suite.config.seed)
    } else {
        let plan: AugmentPlan = serde_json::from_value(raw).map_err(bad)?;
        (plan, TemplatePack::builtin().clone(), 0)
    };
    plan.validate().map_err(|e| CliError::msg(Category::Config, e.to_string()))?;
    Ok((plan, pack, seed))
}

pub fn augment(plan_path: &Path, input: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let (plan, pack, plan_seed) = load_plan(plan_path)?;
    let seed = seed.unwrap_or(plan_seed);
    let records: Vec<InstanceRecord> = read_jsonl(&input.join(INSTANCES_FILE))?;
    let samples = augment_records(&records, &plan, &pack, seed)?;
    let mut by_aug: BTreeMap<String, usize> = BTreeMap::new();
    for s in &samples {
        let tag = serde_json::to_value(s.meta.augmentation).expect("tag serializes");
        *by_aug.entry(tag.as_str().unwrap_or_default().to_string()).or_default() += 1;
    }
    write_jsonl(&out.join(SAMPLES_FILE), &samples)?;
    write_json(
        &out.join("augment.json"),
        &json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "template_version": pack.version,
            "seed": seed,
            "instances": records.len(),
            "samples": samples.len(),
            "augmentations": by_aug,
        }),
    )?;
    println!("wrote {} samples from {} instances to {}", samples.len(), records.len(), out.display());
    Ok(())
}

pub fn build(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let suite = load_suite(config, seed)?;
    let corpus = suite.build()?;
    corpus.emit(out)?;
    let m = &corpus.manifest;
    let rows: Vec<Vec<String>> = m
        .datasets
        .iter()
        .map(|(name, d)| {
            let mut row = vec![name.clone(), d.level.clone()];
            row.extend(Split::ALL.iter().map(|s| d.instances.get(s.name()).copied().unwrap_or(0).to_string()));
            row.push(d.samples.values().sum::<usize>().to_string());
            row
        })
        .collect();
    print!("{}", render_table(&["dataset", "level", "train", "valid", "test", "samples"], &rows));
    println!("wrote {} samples to {}", corpus.samples.len(), out.display());
    Ok(())
}

pub fn infer(corpus: &Path, split: &str, endpoint: &Path, out: &Path, log: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = EndpointConfig::load(endpoint)?;
    cfg.resolve_key()?;
    let samples = load_split(corpus, split)?;
    let mut paths = RunPaths::new(out);
    if let Some(l) = log {
        paths.log = l;
    }
    let s = run_inference_blocking(&samples, split, &cfg, &paths)?;
    println!(
        "{} samples: {} requested, {} already answered, {} failed",
        s.total, s.requested, s.skipped, s.failed
    );
    Ok(())
}

pub fn eval(
    corpus: &Path,
    split: &str,
    preds: &Path,
    report: Option<PathBuf>,
    penalize_unparseable: Option<f64>,
) -> Result<(), CliError> {
    if penalize_unparseable.is_some_and(|v| !v.is_finite() || v < 0.0) {
        return Err(CliError::msg(Category::Usage, "--penalize-unparseable must be a finite value >= 0"));
    }
    let samples = load_split(corpus, split)?;
    let predictions = read_predictions(preds)?;
    let opts = EvalOptions { penalize_unparseable };
    let r = evaluate(split, &samples, &predictions, &opts)?;
    let path = report.unwrap_or_else(|| preds.with_file_name("report.json"));
    write_json(&path, &r)?;
    print!("{}", r.table());
    println!("report: {}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct FormatRow {
    format: String,
    samples: usize,
    mean_input_tokens: f64,
    mean_graph_tokens: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
}

pub fn format_report(corpus: &Path, split: &str, preds: Option<&Path>, json_out: Option<&Path>) -> Result<(), CliError> {
    let samples = load_split(corpus, split)?;
    // self-supervised samples use one format each, so only format renderings are compared
    let rendered: Vec<&InstructionSample> = samples
        .iter()
        .filter(|s| matches!(s.meta.augmentation, Augmentation::None | Augmentation::Format))
        .collect();
    let mut groups: BTreeMap<usize, (String, Vec<&InstructionSample>)> = BTreeMap::new();
    for s in &rendered {
        let order = FormatKind::ALL.iter().position(|k| k.name() == s.format).unwrap_or(usize::MAX);
        groups.entry(order).or_insert_with(|| (s.format.clone(), Vec::new())).1.push(s);
    }
    if groups.len() < 2 {
        return Err(CliError::msg(
            Category::Data,
            format!("format report needs at least two formats; the {split} split has {}", groups.len()),
        ));
    }
    let correct: Option<BTreeMap<String, bool>> = match preds {
        None => None,
        Some(p) => {
            let predictions = read_predictions(p)?;
            let r = evaluate(split, &samples, &predictions, &EvalOptions::default())?;
            Some(
                r.samples
                    .into_iter()
                    .filter(|v| v.metric == Metric::Accuracy)
                    .map(|v| (v.id, v.correct == Some(true)))
                    .collect(),
            )
        }
    };
    let mean = |xs: &[usize]| xs.iter().sum::<usize>() as f64 / xs.len().max(1) as f64;
    let rows: Vec<FormatRow> = groups
        .into_values()
        .map(|(format, members)| {
            let input: Vec<usize> = members.iter().map(|s| count_tokens(&s.input)).collect();
            let graph: Vec<usize> = members
                .iter()
                .map(|s| split_sections(&s.input).map_or(0, |sec| count_tokens(sec.graph_text)))
                .collect();
            let accuracy = correct.as_ref().map(|c| {
                let judged: Vec<bool> = members.iter().filter_map(|s| c.get(&s.id).copied()).collect();
                judged.iter().filter(|x| **x).count() as f64 / judged.len().max(1) as f64
            });
            FormatRow {
                format,
                samples: members.len(),
                mean_input_tokens: mean(&input),
                mean_graph_tokens: mean(&graph),
                accuracy,
            }
        })
        .collect();
    let mut header = vec!["format", "samples", "mean input tokens", "mean graph tokens"];
    if correct.is_some() {
        header.push("accuracy");
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.format.clone(),
                r.samples.to_string(),
                format!("{:.1}", r.mean_input_tokens),
                format!("{:.1}", r.mean_graph_tokens),
            ];
            if let Some(a) = r.accuracy {
                row.push(format!("{a:.4}"));
            }
            row
        })
        .collect();
    print!("{}", render_table(&header, &table));
    if let Some(p) = json_out {
        write_json(p, &json!({ "split": split, "tokenizer": "word-punct", "formats": rows }))?;
    }
    Ok(())
}
