//! Seeded train/valid/test assignment.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn from_name(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|x| x.name() == s)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    #[default]
    Random,
    /// Use the split recorded on each target (semantic datasets only).
    RespectOriginal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default = "default_valid")]
    pub valid: usize,
    #[serde(default = "default_test")]
    pub test: usize,
    #[serde(default)]
    pub mode: SplitMode,
    /// Overrides the suite seed for splitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_train() -> usize {
    500
}
fn default_valid() -> usize {
    100
}
fn default_test() -> usize {
    200
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: default_train(),
            valid: default_valid(),
            test: default_test(),
            mode: SplitMode::Random,
            seed: None,
        }
    }
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }

    pub fn count(&self, s: Split) -> usize {
        match s {
            Split::Train => self.train,
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.train == 0 || self.valid == 0 || self.test == 0 {
            return Err(DatasetError::Config("split counts must be positive".into()));
        }
        Ok(())
    }
}

/// Shuffles `0..n` with `seed` and assigns the first `train` indices to
/// train, the next `valid` to valid and the next `test` to test. Returned
/// pairs are sorted by item index; unselected items are absent.
pub fn split(n: usize, spec: &SplitSpec, seed: u64) -> Result<Vec<(usize, Split)>, DatasetError> {
    spec.validate()?;
    if n < spec.total() {
        return Err(DatasetError::Shortfall {
            what: "items".into(),
            needed: spec.total(),
            available: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(spec.total());
    let mut at = 0;
    for s in Split::ALL {
        let k = spec.count(s);
        out.extend(order[at..at + k].iter().map(|&i| (i, s)));
        at += k;
    }
    out.sort_unstable();
    Ok(out)
}

/// Like [`split`], but draws each split only from items whose provided
/// split matches. Items without a recognised provided split are ignored.
pub fn split_respecting(
    provided: &[Option<String>],
    spec: &SplitSpec,
    seed: u64,
) -> Result<Vec<(usize, Split)>, DatasetError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.total());
    for s in Split::ALL {
        let mut pool: Vec<usize> = provided
            .iter()
            .enumerate()
            .filter(|(_, p)| p.as_deref().and_then(Split::from_name) == Some(s))
            .map(|(i, _)| i)
            .collect();
        let need = spec.count(s);
        if pool.len() < need {
            return Err(DatasetError::Shortfall {
                what: format!("{s} items"),
                needed: need,
                available: pool.len(),
            });
        }
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(crate::seed::derive_seed(seed, &[s.name()])));
        out.extend(pool[..need].iter().map(|&i| (i, s)));
    }
    out.sort_unstable();
    Ok(out)
}
