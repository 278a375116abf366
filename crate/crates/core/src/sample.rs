//! Textualized instruction samples, the unit written to JSONL.

use serde::{Deserialize, Serialize};

use crate::task::{CanonicalAnswer, Metric, TaskInstance, VerifyRule};
use crate::text::templates::TemplatePack;
use crate::text::{lang_g, lang_y, FormatSpec, TextError};

pub const UNASSIGNED: &str = "unassigned";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augmentation {
    /// The sample as generated (single-format plans).
    None,
    /// One of several format renderings of the same instance.
    Format,
    Tae,
    Fmae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMeta {
    pub dataset: String,
    /// Id shared by every sample derived from one task instance.
    pub group: String,
    pub augmentation: Augmentation,
    pub template_version: String,
    pub metric: Metric,
    pub answer: CanonicalAnswer,
    pub verifier: VerifyRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub seed: u64,
    pub nodes: usize,
    pub edges: usize,
    /// Masked element and attribute, for feature-reconstruction samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionSample {
    pub id: String,
    pub task: String,
    pub level: String,
    pub format: String,
    pub split: String,
    pub input: String,
    pub output: String,
    pub meta: SampleMeta,
}

impl InstructionSample {
    /// Key under which scores for this sample are reported.
    pub fn report_key(&self) -> String {
        if self.meta.dataset == self.task {
            self.task.clone()
        } else {
            format!("{}/{}", self.meta.dataset, self.task)
        }
    }
}

/// Task name written into the `task` field.
pub fn task_name(task: &TaskInstance) -> String {
    task.task.template_key()
}

pub struct SampleOrigin<'a> {
    pub id: String,
    pub dataset: &'a str,
    pub group: &'a str,
    pub augmentation: Augmentation,
}

/// Textualizes `task` in `fmt`; the split is left unassigned.
pub fn build_sample(
    task: &TaskInstance,
    fmt: &FormatSpec,
    pack: &TemplatePack,
    origin: SampleOrigin<'_>,
) -> Result<InstructionSample, TextError> {
    Ok(InstructionSample {
        id: origin.id,
        task: task_name(task),
        level: task.task.level_name().to_string(),
        format: fmt.kind.name().to_string(),
        split: UNASSIGNED.to_string(),
        input: lang_g(&task.graph, task, fmt, pack)?,
        output: lang_y(task, pack)?,
        meta: SampleMeta {
            dataset: origin.dataset.to_string(),
            group: origin.group.to_string(),
            augmentation: origin.augmentation,
            template_version: pack.version.clone(),
            metric: task.metric,
            answer: task.answer.clone(),
            verifier: task.verifier.clone(),
            labels: task.labels.clone(),
            seed: task.seed,
            nodes: task.graph.node_count(),
            edges: task.graph.edge_count(),
            probe: task.bindings.get("probe").cloned(),
            masked: task.bindings.get("masked").and_then(|m| m.parse().ok()),
        },
    })
}
