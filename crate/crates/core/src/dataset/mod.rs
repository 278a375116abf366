//! Corpus assembly: semantic-dataset ingestion, splitting and JSONL emission.

pub mod corpus;
pub mod semantic;
pub mod split;

use std::path::PathBuf;

use thiserror::Error;

use crate::augment::AugmentError;
use crate::graph::GraphError;
use crate::synth::GenError;
use crate::text::TextError;

pub use corpus::{Corpus, DatasetCounts, Manifest};
pub use semantic::{SemanticSource, SemanticTaskConfig};
pub use split::{split, Split, SplitMode, SplitSpec};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("not enough {what}: need {needed}, have {available} (short by {})", needed - available)]
    Shortfall {
        what: String,
        needed: usize,
        available: usize,
    },
    #[error("label {label:?} of {dataset} target {target} is readable from its {format} graph text")]
    Leakage {
        dataset: String,
        target: usize,
        label: String,
        format: String,
    },
    #[error("{0}")]
    Overlap(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("manifest mismatch: {0}")]
    Manifest(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.into(),
            source,
        }
    }
}
