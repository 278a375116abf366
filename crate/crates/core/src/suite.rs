//! Task-suite configuration and the generate → split → augment pipeline.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{expand_instance, AugmentPlan};
use crate::dataset::corpus::sha256_hex;
use crate::dataset::semantic::SemanticSource;
use crate::dataset::split::{split, split_respecting, SplitMode};
use crate::dataset::{Corpus, DatasetError, SemanticTaskConfig, Split, SplitSpec};
use crate::sample::{Augmentation, InstructionSample};
use crate::seed::derive_seed;
use crate::synth::{generate_batch, ErOverrides, TaskConstraints};
use crate::task::{TaskInstance, TaskKind};
use crate::text::templates::TemplatePack;

fn default_count() -> usize {
    800
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureTaskConfig {
    pub kind: TaskKind,
    /// Instances to generate; at least the split total when building.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Dataset name; defaults to the task name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub er: ErOverrides,
    #[serde(default)]
    pub constraints: TaskConstraints,
}

impl StructureTaskConfig {
    pub fn dataset_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub seed: u64,
    /// Template pack overriding built-in wording, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub augment: AugmentPlan,
    #[serde(default)]
    pub tasks: Vec<StructureTaskConfig>,
    #[serde(default)]
    pub semantic: Vec<SemanticTaskConfig>,
}

/// A suite config together with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Suite {
    pub config: SuiteConfig,
    pub base: PathBuf,
}

/// Instances of one dataset with their position in the dataset's candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub dataset: String,
    pub index: usize,
    pub instance: TaskInstance,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        let config: SuiteConfig = serde_json::from_str(&text).map_err(|e| DatasetError::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let suite = Suite { config, base };
        suite.validate()?;
        Ok(suite)
    }

    pub fn new(config: SuiteConfig, base: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let suite = Suite {
            config,
            base: base.into(),
        };
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let c = &self.config;
        c.split.validate()?;
        c.augment.validate()?;
        let mut names = BTreeSet::new();
        for n in self.dataset_names() {
            if !names.insert(n.clone()) {
                return Err(DatasetError::Config(format!("dataset name {n:?} used twice")));
            }
        }
        for t in &c.tasks {
            t.constraints.validate(t.kind, &t.er.resolve(t.kind))?;
        }
        for s in &c.semantic {
            s.validate()?;
        }
        if c.split.mode == SplitMode::RespectOriginal && !c.tasks.is_empty() {
            return Err(DatasetError::Config(
                "respect-original splitting needs a provided split, which synthetic tasks lack".into(),
            ));
        }
        Ok(())
    }

    pub fn dataset_names(&self) -> Vec<String> {
        let c = &self.config;
        c.tasks
            .iter()
            .map(StructureTaskConfig::dataset_name)
            .chain(c.semantic.iter().map(|s| s.name.clone()))
            .collect()
    }

    /// Hash of the canonical JSON of the config.
    pub fn config_hash(&self) -> String {
        sha256_hex(serde_json::to_string(&self.config).expect("config serializes").as_bytes())
    }

    pub fn template_pack(&self) -> Result<TemplatePack, DatasetError> {
        match &self.config.templates {
            Some(p) => Ok(TemplatePack::load(self.base.join(p))?),
            None => Ok(TemplatePack::builtin().clone()),
        }
    }

    fn dataset_seed(&self, name: &str) -> u64 {
        derive_seed(self.config.seed, &["dataset", name])
    }

    fn semantic_sources(&self) -> Result<Vec<SemanticSource>, DatasetError> {
        self.config
            .semantic
            .iter()
            .map(|s| SemanticSource::load(s, &self.base, derive_seed(self.dataset_seed(&s.name), &["negatives"])))
            .collect()
    }

    fn semantic_instance(&self, src: &SemanticSource, index: usize) -> Result<TaskInstance, DatasetError> {
        let seed = derive_seed(self.dataset_seed(&src.cfg.name), &["instance", &index.to_string()]);
        src.instance(index, seed)
    }

    /// Every instance of every dataset, in config order.
    pub fn generate(&self) -> Result<Vec<InstanceRecord>, DatasetError> {
        let mut out = Vec::new();
        for t in &self.config.tasks {
            let name = t.dataset_name();
            let batch = generate_batch(t.kind, &t.er.resolve(t.kind), &t.constraints, t.count, self.dataset_seed(&name))?;
            out.extend(batch.into_iter().enumerate().map(|(index, instance)| InstanceRecord {
                dataset: name.clone(),
                index,
                instance,
            }));
        }
        for src in self.semantic_sources()? {
            let built = (0..src.candidates.len())
                .into_par_iter()
                .map(|i| self.semantic_instance(&src, i))
                .collect::<Result<Vec<_>, _>>()?;
            out.extend(built.into_iter().enumerate().map(|(index, instance)| InstanceRecord {
                dataset: src.cfg.name.clone(),
                index,
                instance,
            }));
        }
        Ok(out)
    }

    /// Instances selected for each split. Semantic instances are only built
    /// for selected targets.
    pub fn split_instances(&self) -> Result<Vec<(InstanceRecord, Split)>, DatasetError> {
        let c = &self.config;
        let split_seed = c.split.seed.unwrap_or(c.seed);
        let mut out = Vec::new();
        for t in &c.tasks {
            let name = t.dataset_name();
            if t.count < c.split.total() {
                return Err(DatasetError::Shortfall {
                    what: format!("{name} instances"),
                    needed: c.split.total(),
                    available: t.count,
                });
            }
            let batch = generate_batch(t.kind, &t.er.resolve(t.kind), &t.constraints, t.count, self.dataset_seed(&name))?;
            let assignment = split(batch.len(), &c.split, derive_seed(split_seed, &["split", &name]))?;
            let mut batch: Vec<Option<TaskInstance>> = batch.into_iter().map(Some).collect();
            for (index, s) in assignment {
                let instance = batch[index].take().expect("each index assigned once");
                out.push((
                    InstanceRecord {
                        dataset: name.clone(),
                        index,
                        instance,
                    },
                    s,
                ));
            }
        }
        for src in self.semantic_sources()? {
            let name = &src.cfg.name;
            let seed = derive_seed(split_seed, &["split", name]);
            let assignment = match (&c.split.mode, &src.provided_split) {
                (SplitMode::RespectOriginal, Some(p)) => split_respecting(p, &c.split, seed),
                (SplitMode::RespectOriginal, None) => Err(DatasetError::Config(format!(
                    "{name}: respect-original splitting needs split_attr"
                ))),
                (SplitMode::Random, _) => split(src.candidates.len(), &c.split, seed),
            }
            .map_err(|e| match e {
                DatasetError::Shortfall {
                    what,
                    needed,
                    available,
                } => DatasetError::Shortfall {
                    what: format!("{name} {what}"),
                    needed,
                    available,
                },
                e => e,
            })?;
            let built = assignment
                .par_iter()
                .map(|&(index, s)| {
                    Ok((
                        InstanceRecord {
                            dataset: name.clone(),
                            index,
                            instance: self.semantic_instance(&src, index)?,
                        },
                        s,
                    ))
                })
                .collect::<Result<Vec<_>, DatasetError>>()?;
            out.extend(built);
        }
        Ok(out)
    }

    /// Splits, textualizes and augments every dataset. Self-supervised
    /// samples are only added to the training split.
    pub fn build(&self) -> Result<Corpus, DatasetError> {
        let pack = self.template_pack()?;
        let selected = self.split_instances()?;
        let plan = &self.config.augment;
        let seed = self.config.seed;
        let nested = selected
            .par_iter()
            .map(|(rec, s)| {
                let samples = expand_instance(&rec.instance, plan, &pack, &rec.dataset, rec.index, seed)?;
                Ok(samples
                    .into_iter()
                    .filter(|x| *s == Split::Train || !matches!(x.meta.augmentation, Augmentation::Tae | Augmentation::Fmae))
                    .map(|mut x| {
                        x.split = s.name().to_string();
                        x
                    })
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        let samples: Vec<InstructionSample> = nested.into_iter().flatten().collect();
        Corpus::new(samples, &pack.version, &self.config_hash(), seed)
    }
}

/// Expands instance records into samples with no split assigned.
pub fn augment_records(
    records: &[InstanceRecord],
    plan: &AugmentPlan,
    pack: &TemplatePack,
    seed: u64,
) -> Result<Vec<InstructionSample>, DatasetError> {
    plan.validate()?;
    let nested = records
        .par_iter()
        .map(|r| expand_instance(&r.instance, plan, pack, &r.dataset, r.index, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut samples: Vec<InstructionSample> = nested.into_iter().flatten().collect();
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(samples)
}
