use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tcn::{ranges, TcnConfig};

/// Sampling ranges. Bounds are inclusive; weight decay and learning rate are
/// sampled log-uniformly, integers uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub channels: (usize, usize),
    pub layers: (usize, usize),
    pub weight_decay: (f64, f64),
    #[serde(default)]
    pub learning_rate: Option<(f64, f64)>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            channels: ranges::CHANNELS,
            layers: ranges::LAYERS,
            weight_decay: ranges::WEIGHT_DECAY,
            learning_rate: None,
        }
    }
}

impl SearchSpace {
    pub fn point(config: &TcnConfig) -> Self {
        Self {
            channels: (config.channels, config.channels),
            layers: (config.layers, config.layers),
            weight_decay: (config.weight_decay, config.weight_decay),
            learning_rate: None,
        }
    }

    pub fn validate(&self, check_ranges: bool) -> Result<()> {
        let ordered = self.channels.0 <= self.channels.1
            && self.layers.0 <= self.layers.1
            && self.weight_decay.0 <= self.weight_decay.1
            && self.learning_rate.is_none_or(|(a, b)| a <= b);
        if !ordered {
            return Err(Error::invalid("search space bounds must satisfy lo <= hi"));
        }
        if self.channels.0 == 0 || self.layers.0 == 0 {
            return Err(Error::invalid("channels and layers must be at least 1"));
        }
        let positive = self.weight_decay.0 > 0.0 && self.learning_rate.is_none_or(|(a, _)| a > 0.0);
        if !positive {
            return Err(Error::invalid("log-uniform bounds must be positive"));
        }
        if check_ranges {
            let inside = ranges::CHANNELS.0 <= self.channels.0
                && self.channels.1 <= ranges::CHANNELS.1
                && ranges::LAYERS.0 <= self.layers.0
                && self.layers.1 <= ranges::LAYERS.1
                && ranges::WEIGHT_DECAY.0 <= self.weight_decay.0
                && self.weight_decay.1 <= ranges::WEIGHT_DECAY.1;
            if !inside {
                return Err(Error::invalid(format!(
                    "search space {self:?} leaves channels {:?}, layers {:?}, weight decay {:?}",
                    ranges::CHANNELS,
                    ranges::LAYERS,
                    ranges::WEIGHT_DECAY
                )));
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng, base: &TcnConfig) -> TcnConfig {
        let log_uniform = |rng: &mut _, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                Rng::gen_range(rng, lo.ln()..=hi.ln()).exp()
            }
        };
        let channels = rng.gen_range(self.channels.0..=self.channels.1);
        let layers = rng.gen_range(self.layers.0..=self.layers.1);
        let weight_decay = log_uniform(rng, self.weight_decay);
        let learning_rate = match self.learning_rate {
            Some(r) => log_uniform(rng, r),
            None => base.learning_rate,
        };
        TcnConfig {
            channels,
            layers,
            weight_decay,
            learning_rate,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrial {
    pub index: usize,
    pub channels: usize,
    pub layers: usize,
    pub weight_decay: f64,
    pub learning_rate: f64,
    /// Mean final validation cost over the inner folds; `inf` if training
    /// diverged.
    #[serde(with = "lossy_f64")]
    pub validation_cost: f64,
    pub diverged: bool,
    /// 1-based position in ascending cost order (ties by index).
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: TcnConfig,
    pub best_index: usize,
    pub trials: Vec<SearchTrial>,
}

/// Index of the smallest cost; the earliest index wins ties and NaN never
/// wins.
pub fn select_best(costs: &[f64]) -> Option<usize> {
    costs
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (i, &c)| match best {
            Some((_, b)) if b <= c => best,
            _ => Some((i, c)),
        })
        .map(|(i, _)| i)
}

/// Random search: `n_trials` configs are drawn up front from `seed`, then
/// scored (in parallel) by `objective`. A [`Error::Diverged`] result scores
/// `+inf`; other errors abort the search.
pub fn random_search<F>(
    space: &SearchSpace,
    base: &TcnConfig,
    n_trials: usize,
    seed: u64,
    objective: F,
) -> Result<SearchOutcome>
where
    F: Fn(usize, &TcnConfig) -> Result<f64> + Sync,
{
    if n_trials == 0 {
        return Err(Error::invalid("search needs at least one trial"));
    }
    space.validate(false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<TcnConfig> = (0..n_trials).map(|_| space.sample(&mut rng, base)).collect();

    let costs = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| match objective(i, c) {
            Ok(v) if v.is_finite() => Ok((v, false)),
            Ok(_) | Err(Error::Diverged { .. }) => Ok((f64::INFINITY, true)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;

    let values: Vec<f64> = costs.iter().map(|c| c.0).collect();
    let mut order: Vec<usize> = (0..n_trials).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut rank = vec![0; n_trials];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let best_index = select_best(&values).expect("at least one trial");
    let trials = configs
        .iter()
        .zip(&costs)
        .enumerate()
        .map(|(i, (c, &(cost, diverged)))| SearchTrial {
            index: i,
            channels: c.channels,
            layers: c.layers,
            weight_decay: c.weight_decay,
            learning_rate: c.learning_rate,
            validation_cost: cost,
            diverged,
            rank: rank[i],
        })
        .collect();
    Ok(SearchOutcome {
        best: configs[best_index].clone(),
        best_index,
        trials,
    })
}

/// JSON has no infinities; they are written as `null` and read back as `inf`.
mod lossy_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
