use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hrir_tcn_core::pipeline::{ExperimentSettings, Protocol};
use serde::{Deserialize, Serialize};

use crate::args::{GlobalArgs, TrainingArgs};

/// Run configuration file. Every key is optional; the experiment keys
/// (`base`, `space`, `n_trials`, `search_epochs`, `directions`,
/// `record_every`, `workers`, `seed`, `check_ranges`) sit at the top level.
///
/// ```json
/// {
///   "dataset": "data/riec",
///   "out": "runs/desk",
///   "protocol": "riec_cv",
///   "seed": 7,
///   "n_trials": 4,
///   "base": { "epochs": 500, "channels": 32, "layers": 8 }
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub external: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub protocol: Protocol,
    #[serde(flatten)]
    pub settings: ExperimentSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            external: None,
            out: None,
            checkpoints: None,
            protocol: Protocol::RiecCv,
            settings: ExperimentSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Config file (if any) with the global flags applied on top.
    pub fn load(global: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &global.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(seed) = global.seed {
            cfg.settings.seed = seed;
        }
        if global.workers.is_some() {
            cfg.settings.workers = global.workers;
        }
        if global.out.is_some() {
            cfg.out.clone_from(&global.out);
        }
        if global.unsafe_ranges {
            cfg.settings.check_ranges = false;
        }
        Ok(cfg)
    }

    pub fn apply_training(&mut self, t: &TrainingArgs) {
        let s = &mut self.settings;
        if t.dataset.is_some() {
            self.dataset.clone_from(&t.dataset);
        }
        let set = |dst: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut s.base.epochs, t.epochs);
        set(&mut s.base.channels, t.channels);
        set(&mut s.base.layers, t.layers);
        set(&mut s.n_trials, t.trials);
        set(&mut s.record_every, t.record_every);
        if let Some(v) = t.weight_decay {
            s.base.weight_decay = v;
        }
        if let Some(v) = t.learning_rate {
            s.base.learning_rate = v;
        }
        if let Some(v) = t.dropout {
            s.base.dropout = v;
        }
        if t.search_epochs.is_some() {
            s.search_epochs = t.search_epochs;
        }
        if let Some(r) = t.search_channels {
            s.space.channels = r;
        }
        if let Some(r) = t.search_layers {
            s.space.layers = r;
        }
        if let Some(r) = t.search_weight_decay {
            s.space.weight_decay = r;
        }
        if let Some(d) = &t.directions {
            s.directions.clone_from(d);
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| crate::usage("an output directory is required (--out or \"out\" in the config)"))
    }

    pub fn dataset_dir(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| crate::usage("a dataset is required (--dataset or \"dataset\" in the config)"))
    }
}
