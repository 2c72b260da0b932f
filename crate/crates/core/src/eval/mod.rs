//! Listening-test stimuli, trial scheduling and localization scoring.

pub mod anova;
pub mod render;
pub mod scoring;
pub mod session;

pub use anova::{two_way_anova, AnovaTable, EffectRow, ErrorRow};
pub use render::{
    band_limited_noise, convolve, default_source, render_binaural, render_stimulus, wav_bytes, HrtfType, Stimulus,
    PEAK_LEVEL,
};
pub use scoring::{
    confusion_ratio, front_back_confused, localization_error, score_session, ConditionSummary, ScoredTrial,
    SessionResult, TrialResponse,
};
pub use session::{build_session, Condition, Trial, TrialPlan, TRIALS_PER_CONDITION};
