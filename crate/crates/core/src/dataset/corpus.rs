//! Split files, manifest, and their reload.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::split::Split;
use super::DatasetError;
use crate::sample::{Augmentation, InstructionSample};
use crate::task::Metric;
use crate::text::split_sections;

pub const SCHEMA_VERSION: &str = "forge-corpus-1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetCounts {
    pub task: String,
    pub level: String,
    pub metric: Metric,
    /// Samples per split.
    pub samples: BTreeMap<String, usize>,
    /// Task instances (sample groups) per split.
    pub instances: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: String,
    pub tool_version: String,
    pub template_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub splits: BTreeMap<String, usize>,
    pub datasets: BTreeMap<String, DatasetCounts>,
    pub tasks: BTreeMap<String, usize>,
    pub formats: BTreeMap<String, usize>,
    pub augmentations: BTreeMap<String, usize>,
}

impl Manifest {
    pub fn describe(samples: &[InstructionSample], template_version: &str, config_hash: &str, seed: u64) -> Self {
        let mut splits: BTreeMap<String, usize> = Split::ALL.iter().map(|s| (s.name().to_string(), 0)).collect();
        let mut datasets: BTreeMap<String, DatasetCounts> = BTreeMap::new();
        let mut tasks = BTreeMap::new();
        let mut formats = BTreeMap::new();
        let mut augmentations = BTreeMap::new();
        let mut groups: BTreeMap<(&str, &str), &str> = BTreeMap::new();
        for s in samples {
            *splits.entry(s.split.clone()).or_default() += 1;
            *tasks.entry(s.task.clone()).or_default() += 1;
            *formats.entry(s.format.clone()).or_default() += 1;
            let tag = serde_json::to_value(s.meta.augmentation).expect("tag serializes");
            *augmentations
                .entry(tag.as_str().unwrap_or_default().to_string())
                .or_default() += 1;
            let d = datasets.entry(s.meta.dataset.clone()).or_insert_with(|| DatasetCounts {
                task: s.task.clone(),
                level: s.level.clone(),
                metric: s.meta.metric,
                samples: BTreeMap::new(),
                instances: BTreeMap::new(),
            });
            if matches!(s.meta.augmentation, Augmentation::None | Augmentation::Format) {
                d.task = s.task.clone();
                d.level = s.level.clone();
                d.metric = s.meta.metric;
            }
            *d.samples.entry(s.split.clone()).or_default() += 1;
            groups.insert((&s.meta.dataset, &s.meta.group), &s.split);
        }
        for ((dataset, _), split) in groups {
            let d = datasets.get_mut(dataset).expect("dataset counted");
            *d.instances.entry(split.to_string()).or_default() += 1;
        }
        Manifest {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            template_version: template_version.into(),
            config_hash: config_hash.into(),
            seed,
            splits,
            datasets,
            tasks,
            formats,
            augmentations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Sorted by id.
    pub samples: Vec<InstructionSample>,
    pub manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Corpus {
    /// Sorts samples, checks id uniqueness and split overlap, and derives the manifest.
    pub fn new(
        mut samples: Vec<InstructionSample>,
        template_version: &str,
        config_hash: &str,
        seed: u64,
    ) -> Result<Self, DatasetError> {
        samples.sort_by(|a, b| a.id.cmp(&b.id));
        for w in samples.windows(2) {
            if w[0].id == w[1].id {
                return Err(DatasetError::Overlap(format!("duplicate sample id {:?}", w[0].id)));
            }
        }
        for s in &samples {
            if Split::from_name(&s.split).is_none() {
                return Err(DatasetError::Config(format!("sample {} has no split", s.id)));
            }
        }
        check_disjoint(&samples)?;
        let manifest = Manifest::describe(&samples, template_version, config_hash, seed);
        Ok(Corpus { samples, manifest })
    }

    pub fn split(&self, s: Split) -> impl Iterator<Item = &InstructionSample> {
        self.samples.iter().filter(move |x| x.split == s.name())
    }

    /// Writes `train.jsonl`, `valid.jsonl`, `test.jsonl` and `manifest.json`.
    pub fn emit(&self, dir: &Path) -> Result<(), DatasetError> {
        fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
        for s in Split::ALL {
            write_jsonl(&dir.join(format!("{s}.jsonl")), self.split(s))?;
        }
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| DatasetError::io(&path, e))
    }

    /// Reads an emitted corpus and checks it against its manifest.
    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| DatasetError::Malformed {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(DatasetError::Manifest(format!(
                "schema {:?}, expected {SCHEMA_VERSION:?}",
                manifest.schema_version
            )));
        }
        let mut samples = Vec::new();
        for s in Split::ALL {
            let p = dir.join(format!("{s}.jsonl"));
            let part: Vec<InstructionSample> = read_jsonl(&p)?;
            if let Some(bad) = part.iter().find(|x| x.split != s.name()) {
                return Err(DatasetError::Manifest(format!("{} in {} has split {:?}", bad.id, p.display(), bad.split)));
            }
            samples.extend(part);
        }
        let mut corpus = Corpus::new(samples, &manifest.template_version, &manifest.config_hash, manifest.seed)?;
        corpus.manifest.tool_version = manifest.tool_version.clone();
        if corpus.manifest != manifest {
            return Err(DatasetError::Manifest("counts in manifest.json differ from the split files".into()));
        }
        Ok(corpus)
    }

    /// Samples of one split file, without the rest of the corpus.
    pub fn load_split(dir: &Path, s: Split) -> Result<Vec<InstructionSample>, DatasetError> {
        read_jsonl(&dir.join(format!("{s}.jsonl")))
    }
}

/// A full input must not occur in two splits, and the graph text of a
/// held-out synthetic-task sample must not occur in a training input of the
/// same dataset. Small random graphs of different tasks may coincide, and so
/// may ego graphs of nearby targets in one semantic graph; those are only
/// checked on full inputs.
pub fn check_disjoint(samples: &[InstructionSample]) -> Result<(), DatasetError> {
    let mut inputs: HashMap<String, (&str, &str)> = HashMap::new();
    for s in samples {
        let h = sha256_hex(s.input.as_bytes());
        if let Some((split, id)) = inputs.get(&h) {
            if *split != s.split {
                return Err(DatasetError::Overlap(format!(
                    "{} ({}) and {} ({}) have identical inputs",
                    id, split, s.id, s.split
                )));
            }
        } else {
            inputs.insert(h, (&s.split, &s.id));
        }
    }
    let graph_hash = |s: &InstructionSample| {
        split_sections(&s.input).map(|sec| sha256_hex(sec.graph_text.as_bytes()))
    };
    let mut held_out: HashMap<(&str, String), &str> = HashMap::new();
    for s in samples {
        let synthetic = matches!(s.level.as_str(), "entity" | "path" | "structure");
        if synthetic && s.split != Split::Train.name() {
            if let Some(h) = graph_hash(s) {
                held_out.insert((&s.meta.dataset, h), &s.id);
            }
        }
    }
    for s in samples.iter().filter(|s| s.split == Split::Train.name()) {
        if let Some(id) = graph_hash(s).and_then(|h| held_out.get(&(s.meta.dataset.as_str(), h))) {
            return Err(DatasetError::Overlap(format!(
                "training sample {} shows the graph of held-out sample {id}",
                s.id
            )));
        }
    }
    Ok(())
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| DatasetError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).expect("records serialize");
        w.write_all(b"\n").map_err(|e| DatasetError::io(path, e))?;
    }
    w.flush().map_err(|e| DatasetError::io(path, e))
}

/// Parses one JSON value per nonblank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
