use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::anova::{two_way_anova, AnovaTable};
use super::render::HrtfType;
use super::session::{Condition, TrialPlan};
use crate::error::{Error, Result};

/// Azimuths within this distance of cos = 0 lie on the interaural axis and
/// belong to neither hemisphere.
const HEMISPHERE_EPS: f64 = 1e-9;

/// Great-circle distance on the horizontal plane, in [0, 180].
pub fn localization_error(target_deg: f64, perceived_deg: f64) -> f64 {
    let d = (target_deg - perceived_deg).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

/// True when the two azimuths fall in opposite front/back hemispheres.
pub fn front_back_confused(target_deg: f64, perceived_deg: f64) -> bool {
    let side = |deg: f64| {
        let c = deg.to_radians().cos();
        if c.abs() <= HEMISPHERE_EPS {
            0.0
        } else {
            c.signum()
        }
    };
    side(target_deg) * side(perceived_deg) < 0.0
}

/// Percentage of confused trials.
pub fn confusion_ratio(confused: &[bool]) -> Result<f64> {
    if confused.is_empty() {
        return Err(Error::invalid("confusion ratio of an empty condition"));
    }
    let n = confused.iter().filter(|&&c| c).count();
    Ok(100.0 * n as f64 / confused.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResponse {
    pub trial_index: usize,
    pub perceived_azimuth_deg: f64,
    /// Slider position; collected but not scored.
    pub perceived_distance: f64,
    pub response_time_ms: f64,
}

impl TrialResponse {
    pub fn validate(&self) -> Result<()> {
        if !(self.perceived_azimuth_deg.is_finite() && (0.0..360.0).contains(&self.perceived_azimuth_deg)) {
            return Err(Error::invalid(format!(
                "perceived azimuth {} is outside [0, 360)",
                self.perceived_azimuth_deg
            )));
        }
        if !self.perceived_distance.is_finite() {
            return Err(Error::invalid("perceived distance must be finite"));
        }
        if !(self.response_time_ms.is_finite() && self.response_time_ms >= 0.0) {
            return Err(Error::invalid("response time must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTrial {
    pub trial_index: usize,
    pub stimulus_id: String,
    pub hrtf_type: HrtfType,
    pub target_deg: u32,
    pub perceived_deg: f64,
    pub perceived_distance: f64,
    pub response_time_ms: f64,
    pub error_deg: f64,
    pub fb_confused: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub direction: u32,
    pub hrtf_type: HrtfType,
    pub n: usize,
    pub mean_error_deg: f64,
    pub confusion_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub subject_id: String,
    pub seed: u64,
    pub trials: Vec<ScoredTrial>,
    /// Ordered by HRTF type, then direction.
    pub conditions: Vec<ConditionSummary>,
    /// Absent when a condition has fewer than two trials.
    pub error_anova: Option<AnovaTable>,
    /// Computed on a per-trial 0/100 confusion indicator, so cell means are
    /// the confusion percentages.
    pub confusion_anova: Option<AnovaTable>,
}

pub fn summarize_conditions(trials: &[ScoredTrial]) -> Result<Vec<ConditionSummary>> {
    let mut groups: BTreeMap<Condition, Vec<&ScoredTrial>> = BTreeMap::new();
    for t in trials {
        let c = Condition {
            direction: t.target_deg,
            hrtf_type: t.hrtf_type,
        };
        groups.entry(c).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|(c, g)| {
            let flags: Vec<bool> = g.iter().map(|t| t.fb_confused).collect();
            Ok(ConditionSummary {
                direction: c.direction,
                hrtf_type: c.hrtf_type,
                n: g.len(),
                mean_error_deg: g.iter().map(|t| t.error_deg).sum::<f64>() / g.len() as f64,
                confusion_pct: confusion_ratio(&flags)?,
            })
        })
        .collect()
}

/// Scores a completed session. Every trial of `plan` needs exactly one
/// response.
pub fn score_session(plan: &TrialPlan, responses: &[TrialResponse]) -> Result<SessionResult> {
    let mut by_index: BTreeMap<usize, &TrialResponse> = BTreeMap::new();
    for r in responses {
        r.validate()?;
        if r.trial_index >= plan.len() {
            return Err(Error::invalid(format!("response for unknown trial {}", r.trial_index)));
        }
        if by_index.insert(r.trial_index, r).is_some() {
            return Err(Error::invalid(format!("duplicate response for trial {}", r.trial_index)));
        }
    }
    if let Some(t) = plan.trials.iter().find(|t| !by_index.contains_key(&t.trial_index)) {
        return Err(Error::invalid(format!("trial {} has no response", t.trial_index)));
    }

    let trials: Vec<ScoredTrial> = plan
        .trials
        .iter()
        .map(|t| {
            let r = by_index[&t.trial_index];
            let target = t.condition.direction as f64;
            ScoredTrial {
                trial_index: t.trial_index,
                stimulus_id: t.stimulus_id.clone(),
                hrtf_type: t.condition.hrtf_type,
                target_deg: t.condition.direction,
                perceived_deg: r.perceived_azimuth_deg,
                perceived_distance: r.perceived_distance,
                response_time_ms: r.response_time_ms,
                error_deg: localization_error(target, r.perceived_azimuth_deg),
                fb_confused: front_back_confused(target, r.perceived_azimuth_deg),
            }
        })
        .collect();

    let a: Vec<usize> = trials.iter().map(|t| t.hrtf_type as usize).collect();
    let b: Vec<usize> = trials.iter().map(|t| t.target_deg as usize).collect();
    let errors: Vec<f64> = trials.iter().map(|t| t.error_deg).collect();
    let confusions: Vec<f64> = trials.iter().map(|t| if t.fb_confused { 100.0 } else { 0.0 }).collect();
    let anova = |v: &[f64]| (plan.trials_per_condition >= 2).then(|| two_way_anova(v, &a, &b)).transpose();

    Ok(SessionResult {
        subject_id: plan.subject_id.clone(),
        seed: plan.seed,
        conditions: summarize_conditions(&trials)?,
        error_anova: anova(&errors)?,
        confusion_anova: anova(&confusions)?,
        trials,
    })
}

impl SessionResult {
    pub fn condition(&self, direction: u32, hrtf_type: HrtfType) -> Option<&ConditionSummary> {
        self.conditions
            .iter()
            .find(|c| c.direction == direction && c.hrtf_type == hrtf_type)
    }

    pub fn write_trials_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        for t in &self.trials {
            w.serialize(t).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::pipeline::report::write_json(path, self)
    }
}
