use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Nested cross-validation inside one dataset: 4 outer folds holding out
    /// a fifth of the subjects each, 4 inner folds for model selection.
    RiecCv,
    /// 5 folds over the training dataset for model selection only.
    Transfer,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::RiecCv => "riec_cv",
            Protocol::Transfer => "transfer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "riec_cv" => Some(Protocol::RiecCv),
            "transfer" => Some(Protocol::Transfer),
            _ => None,
        }
    }
}

/// Subject indices on each side of one split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterFold {
    pub split: Split,
    /// Model-selection splits of `split.train`.
    pub inner: Vec<Split>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub protocol: Protocol,
    pub n_subjects: usize,
    pub seed: u64,
    pub folds: Vec<OuterFold>,
}

const OUTER_FOLDS: usize = 4;
const INNER_FOLDS: usize = 4;
const TRANSFER_FOLDS: usize = 5;

/// `k` splits of `ids`, each holding out a disjoint chunk of
/// `floor(ids.len() / chunks)` ids; ids beyond the last chunk always train.
fn chunked(ids: &[usize], k: usize, chunks: usize) -> Vec<Split> {
    let size = ids.len() / chunks;
    (0..k)
        .map(|f| {
            let held = f * size..(f + 1) * size;
            let mut test = ids[held.clone()].to_vec();
            let mut train: Vec<usize> = ids
                .iter()
                .enumerate()
                .filter(|(i, _)| !held.contains(i))
                .map(|(_, &id)| id)
                .collect();
            test.sort_unstable();
            train.sort_unstable();
            Split { train, test }
        })
        .collect()
}

/// Seeded fold plan over subject indices `0..n_subjects`.
///
/// With 105 subjects, `riec_cv` yields 4 outer 84/21 splits, each with 4
/// inner 63/21 splits; `transfer` yields 5 splits of 84/21. Smaller sets
/// scale proportionally with floor rounding, the remainder training.
pub fn make_fold_plan(n_subjects: usize, protocol: Protocol, seed: u64) -> Result<FoldPlan> {
    let mut ids: Vec<usize> = (0..n_subjects).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let folds = match protocol {
        Protocol::RiecCv => {
            // a fifth is held out per fold, so 4 folds leave a fifth never tested
            if n_subjects < TRANSFER_FOLDS {
                return Err(Error::invalid(format!(
                    "riec_cv needs at least {TRANSFER_FOLDS} subjects, got {n_subjects}"
                )));
            }
            chunked(&ids, OUTER_FOLDS, TRANSFER_FOLDS)
                .into_iter()
                .enumerate()
                .map(|(f, split)| {
                    let mut inner_ids = split.train.clone();
                    inner_ids.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[f as u64])));
                    OuterFold {
                        inner: chunked(&inner_ids, INNER_FOLDS, INNER_FOLDS),
                        split,
                    }
                })
                .collect()
        }
        Protocol::Transfer => {
            if n_subjects < TRANSFER_FOLDS {
                return Err(Error::invalid(format!(
                    "transfer needs at least {TRANSFER_FOLDS} subjects, got {n_subjects}"
                )));
            }
            let inner = chunked(&ids, TRANSFER_FOLDS, TRANSFER_FOLDS);
            vec![OuterFold {
                split: Split {
                    train: (0..n_subjects).collect(),
                    test: Vec::new(),
                },
                inner,
            }]
        }
    };
    Ok(FoldPlan {
        protocol,
        n_subjects,
        seed,
        folds,
    })
}
