use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::{HrtfType, Stimulus};
use crate::dsp::TARGET_AZIMUTHS;
use crate::error::{Error, Result};

pub const TRIALS_PER_CONDITION: usize = 10;

/// One cell of the listening-test design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub direction: u32,
    pub hrtf_type: HrtfType,
}

impl Condition {
    /// All ten conditions, ordered by type then direction.
    pub fn all() -> Vec<Condition> {
        HrtfType::BOTH
            .iter()
            .flat_map(|&hrtf_type| TARGET_AZIMUTHS.iter().map(move |&direction| Condition { direction, hrtf_type }))
            .collect()
    }

    pub fn label(&self) -> String {
        format!("{} {:03} deg", self.hrtf_type.as_str(), self.direction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_index: usize,
    pub stimulus_id: String,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub subject_id: String,
    pub seed: u64,
    pub trials_per_condition: usize,
    pub trials: Vec<Trial>,
}

impl TrialPlan {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn count(&self, condition: Condition) -> usize {
        self.trials.iter().filter(|t| t.condition == condition).count()
    }
}

fn condition_of(s: &Stimulus) -> Option<Condition> {
    let az = s.direction.azimuth_deg.round();
    if (s.direction.azimuth_deg - az).abs() > 1e-9 {
        return None;
    }
    let direction = az as u32;
    TARGET_AZIMUTHS
        .contains(&direction)
        .then_some(Condition { direction, hrtf_type: s.hrtf_type })
}

/// Shuffled schedule holding `trials_per_condition` presentations of each
/// of the ten conditions. When several stimuli share a condition the first
/// one is used.
pub fn build_session(
    subject_id: &str,
    stimuli: &[Stimulus],
    trials_per_condition: usize,
    seed: u64,
) -> Result<TrialPlan> {
    if subject_id.trim().is_empty() {
        return Err(Error::invalid("subject id is empty"));
    }
    if trials_per_condition == 0 {
        return Err(Error::invalid("trials per condition must be at least 1"));
    }
    let conditions = Condition::all();
    let mut chosen = Vec::with_capacity(conditions.len());
    let mut missing = Vec::new();
    for c in &conditions {
        match stimuli.iter().find(|s| condition_of(s) == Some(*c)) {
            Some(s) => chosen.push((*c, s.stimulus_id.clone())),
            None => missing.push(c.label()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::invalid(format!("missing stimulus for {}", missing.join(", "))));
    }
    let mut order: Vec<(Condition, String)> = chosen
        .iter()
        .flat_map(|c| std::iter::repeat_n(c.clone(), trials_per_condition))
        .collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(TrialPlan {
        subject_id: subject_id.to_owned(),
        seed,
        trials_per_condition,
        trials: order
            .into_iter()
            .enumerate()
            .map(|(trial_index, (condition, stimulus_id))| Trial {
                trial_index,
                stimulus_id,
                condition,
            })
            .collect(),
    })
}
