//! Dataset ingestion, fold plans, hyperparameter search, experiment runs and
//! their reports.

pub mod dataset;
mod experiment;
pub mod folds;
pub mod report;
pub mod search;
pub mod synth;

pub use dataset::{load_dataset, Manifest, Source, SubjectRecord};
pub use experiment::{
    generate, hyperparameter_search, with_pool, run_riec_cv, run_transfer, score_subjects, training_pairs, ExperimentOutcome,
    ExperimentSettings,
    RunDir,
};
pub use folds::{make_fold_plan, FoldPlan, OuterFold, Protocol, Split};
pub use report::{EvaluationReport, ReportRow, SubjectSet, UnitKey, UnitResult};
pub use search::{random_search, select_best, SearchOutcome, SearchSpace, SearchTrial};

/// Mixes `parts` into `base` (SplitMix64 finalizer per part), giving
/// independent seeds for nested work units.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(base, |acc, &p| {
        let mut z = acc ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    })
}
