use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::SubjectRecord;
use super::derive_seed;
use super::folds::{make_fold_plan, OuterFold, Protocol, Split};
use super::report::{
    write_json, write_loss_curve_csv, write_objective_csv, Ear, EvaluationReport, ReportRow, SubjectSet,
    UnitKey, UnitResult,
};
use super::search::{random_search, SearchOutcome, SearchSpace};
use crate::dsp::{self, Direction, HrirPair, CANONICAL_BAND, SD_TRANSFORM_SIZE, TARGET_AZIMUTHS};
use crate::error::{Error, Result};
use crate::metrics;
use crate::tcn::{checkpoint, pair_to_sequence, sequence_to_pair, train, TcnConfig, TcnModel, TrainOptions, TrainingPair};

/// Knobs of a cross-validation or transfer run. Defaults are the full-scale
/// protocol: 50 search trials, 10000 epochs, all five target directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSettings {
    /// Architecture and training settings; `channels`, `layers` and
    /// `weight_decay` are overwritten by the search.
    pub base: TcnConfig,
    pub space: SearchSpace,
    pub n_trials: usize,
    /// Epochs per search trial; `None` uses `base.epochs`.
    pub search_epochs: Option<usize>,
    pub directions: Vec<u32>,
    pub record_every: usize,
    /// Upper bound on concurrently running work units and trainings.
    pub workers: Option<usize>,
    pub seed: u64,
    /// Enforce the architecture ranges on the search space.
    pub check_ranges: bool,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            base: TcnConfig::default(),
            space: SearchSpace::default(),
            n_trials: 50,
            search_epochs: None,
            directions: TARGET_AZIMUTHS.to_vec(),
            record_every: 100,
            workers: None,
            seed: 0,
            check_ranges: true,
        }
    }
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<()> {
        self.base.validate_structure()?;
        if self.check_ranges {
            self.base.validate_ranges()?;
        }
        self.space.validate(self.check_ranges)?;
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if let Some(bad) = self.directions.iter().find(|d| !TARGET_AZIMUTHS.contains(d)) {
            return Err(Error::invalid(format!("direction {bad} is not a target azimuth")));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }
}

/// Result of a run plus bookkeeping that does not belong in the report.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: EvaluationReport,
    /// Units loaded from an earlier run instead of being recomputed.
    pub resumed: Vec<UnitKey>,
    pub failed: Vec<(UnitKey, Error)>,
}

/// Model output for a canonical 0 degree pair, tagged with `direction`.
pub fn generate(model: &TcnModel, input: &HrirPair, direction: Direction) -> Result<HrirPair> {
    if !input.is_canonical() {
        return Err(Error::precondition(format!(
            "input pair must be 492 samples at 44100 Hz, got {} at {} Hz",
            input.len(),
            input.sample_rate()
        )));
    }
    let y = model.predict(&pair_to_sequence(input))?;
    sequence_to_pair(&y, input.sample_rate(), direction)
}

/// (0 degree, `direction`) training pairs for the given subject indices.
pub fn training_pairs(data: &[SubjectRecord], ids: &[usize], direction: u32) -> Result<Vec<TrainingPair>> {
    ids.iter()
        .map(|&i| {
            let s = &data[i];
            Ok(TrainingPair {
                input: s.pair(0)?.clone(),
                target: s.pair(direction)?.clone(),
            })
        })
        .collect()
}

/// SD/SDR rows of `model` on each subject, both ears, with the 0 degree
/// baseline alongside.
pub fn score_subjects(
    model: &TcnModel,
    subjects: &[&SubjectRecord],
    key: UnitKey,
    set: SubjectSet,
) -> Result<Vec<ReportRow>> {
    let per_subject = subjects
        .par_iter()
        .map(|s| {
            let input = s.pair(0)?;
            let target = s.pair(key.direction)?;
            let out = generate(model, input, target.direction)?;
            let sd = |a, b| -> Result<f64> {
                let fa = dsp::magnitude_spectrum(a, SD_TRANSFORM_SIZE, CANONICAL_BAND)?;
                let fb = dsp::magnitude_spectrum(b, SD_TRANSFORM_SIZE, CANONICAL_BAND)?;
                metrics::spectral_distortion(&fa, &fb)
            };
            Ear::BOTH
                .iter()
                .zip(target.ears().into_iter().zip(out.ears()).zip(input.ears()))
                .map(|(&ear, ((t, g), x))| {
                    Ok(ReportRow {
                        subject_id: s.subject_id.clone(),
                        direction: key.direction,
                        fold: key.fold,
                        set,
                        ear,
                        sd_db: sd(t, g)?,
                        sdr_db: metrics::sdr(t, g)?,
                        baseline_sd_db: sd(t, x)?,
                        baseline_sdr_db: metrics::sdr(t, x)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_subject.into_iter().flatten().collect())
}

/// Random search over `settings.space`. Each trial trains on the fit side of
/// every split and scores the mean final validation cost across splits.
pub fn hyperparameter_search(
    data: &[SubjectRecord],
    splits: &[Split],
    direction: u32,
    settings: &ExperimentSettings,
    seed: u64,
) -> Result<SearchOutcome> {
    if splits.is_empty() || splits.iter().any(|s| s.train.is_empty() || s.test.is_empty()) {
        return Err(Error::invalid("search needs splits with both fit and validation subjects"));
    }
    let fold_pairs = splits
        .iter()
        .map(|s| Ok((training_pairs(data, &s.train, direction)?, training_pairs(data, &s.test, direction)?)))
        .collect::<Result<Vec<_>>>()?;
    let search_base = TcnConfig {
        epochs: settings.search_epochs.unwrap_or(settings.base.epochs),
        ..settings.base.clone()
    };
    random_search(&settings.space, &search_base, settings.n_trials, seed, |trial, config| {
        let costs = fold_pairs
            .par_iter()
            .enumerate()
            .map(|(k, (fit, val))| {
                let config = TcnConfig {
                    seed: derive_seed(seed, &[trial as u64, k as u64]),
                    ..config.clone()
                };
                let opts = TrainOptions {
                    record_every: 0,
                    validation: val,
                    ..TrainOptions::default()
                };
                let (_, record) = train(&config, fit, &opts)?;
                Ok(record
                    .last()
                    .and_then(|e| e.validation)
                    .map_or(f64::INFINITY, |v| v.cost))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(costs.iter().sum::<f64>() / costs.len() as f64)
    })
}

struct Unit<'a> {
    key: UnitKey,
    fold: &'a OuterFold,
    /// Scored after training, with their set label.
    scored: Vec<(&'a SubjectRecord, SubjectSet)>,
    /// Recorded as the validation curve during the final training.
    monitor: Vec<TrainingPair>,
}

fn run_unit(data: &[SubjectRecord], unit: &Unit<'_>, settings: &ExperimentSettings) -> Result<(UnitResult, TcnModel)> {
    let d = unit.key.direction;
    let unit_seed = derive_seed(settings.seed, &[d as u64, unit.key.fold as u64]);
    let search = hyperparameter_search(data, &unit.fold.inner, d, settings, unit_seed)?;

    let config = TcnConfig {
        epochs: settings.base.epochs,
        seed: derive_seed(unit_seed, &[u64::MAX]),
        ..search.best.clone()
    };
    let train_pairs = training_pairs(data, &unit.fold.split.train, d)?;
    let opts = TrainOptions {
        record_every: settings.record_every,
        validation: &unit.monitor,
        ..TrainOptions::default()
    };
    let (model, record) = train(&config, &train_pairs, &opts)?;

    let mut rows = Vec::new();
    for set in [SubjectSet::Train, SubjectSet::Test, SubjectSet::External] {
        let subjects: Vec<&SubjectRecord> = unit.scored.iter().filter(|(_, s)| *s == set).map(|(r, _)| *r).collect();
        rows.extend(score_subjects(&model, &subjects, unit.key, set)?);
    }
    let result = UnitResult {
        key: unit.key,
        search,
        config,
        record,
        rows,
    };
    Ok((result, model))
}

/// Output layout below the run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["units", "checkpoints", "curves", "search"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn unit_path(&self, key: UnitKey) -> PathBuf {
        self.root.join("units").join(format!("{}.json", key.stem()))
    }

    pub fn checkpoint_path(&self, key: UnitKey, protocol: Protocol) -> PathBuf {
        let name = match protocol {
            Protocol::RiecCv => format!("{}.ckpt", key.stem()),
            Protocol::Transfer => format!("az{:03}.ckpt", key.direction),
        };
        self.root.join("checkpoints").join(name)
    }

    fn load_unit(&self, key: UnitKey) -> Option<UnitResult> {
        let text = fs::read_to_string(self.unit_path(key)).ok()?;
        serde_json::from_str::<UnitResult>(&text).ok().filter(|u| u.key == key)
    }

    fn store_unit(&self, unit: &UnitResult, model: &TcnModel, protocol: Protocol, seed: u64) -> Result<()> {
        let stem = unit.key.stem();
        let mut meta = BTreeMap::new();
        meta.insert("direction_deg".to_string(), unit.key.direction.to_string());
        meta.insert("fold".to_string(), unit.key.fold.to_string());
        meta.insert("protocol".to_string(), protocol.as_str().to_string());
        meta.insert("run_seed".to_string(), seed.to_string());
        meta.insert("best_trial".to_string(), unit.search.best_index.to_string());
        checkpoint::save(self.checkpoint_path(unit.key, protocol), model, &meta)?;
        write_loss_curve_csv(&self.root.join("curves").join(format!("{stem}.csv")), &unit.record)?;
        write_objective_csv(&self.root.join("curves").join(format!("{stem}_objective.csv")), &unit.record)?;
        write_json(&self.root.join("search").join(format!("{stem}.json")), &unit.search)?;
        // the unit file goes last: its presence marks the unit complete
        write_json(&self.unit_path(unit.key), unit)
    }

    pub fn write_report(&self, report: &EvaluationReport) -> Result<()> {
        report.write_rows_csv(&self.root.join("report.csv"))?;
        report.write_summary_json(&self.root.join("summary.json"))
    }
}

/// Runs `f` on a pool of `workers` threads, or the global pool.
pub fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn execute(
    data: &[SubjectRecord],
    units: Vec<Unit<'_>>,
    settings: &ExperimentSettings,
    protocol: Protocol,
    run_dir: Option<&RunDir>,
) -> Result<ExperimentOutcome> {
    let results: Vec<(UnitKey, Result<UnitResult>, bool)> = with_pool(settings.workers, || {
        units
            .par_iter()
            .map(|unit| {
                if let Some(done) = run_dir.and_then(|r| r.load_unit(unit.key)) {
                    log::info!("unit {} already complete, skipping", unit.key.stem());
                    return (unit.key, Ok(done), true);
                }
                log::info!("unit {} started", unit.key.stem());
                let res = run_unit_persisted(data, unit, settings, protocol, run_dir);
                match &res {
                    Ok(_) => log::info!("unit {} finished", unit.key.stem()),
                    Err(e) => log::warn!("unit {} failed: {e}", unit.key.stem()),
                }
                (unit.key, res, false)
            })
            .collect()
    })?;

    let mut done = Vec::new();
    let mut resumed = Vec::new();
    let mut failed = Vec::new();
    for (key, res, was_resumed) in results {
        match res {
            Ok(u) => {
                if was_resumed {
                    resumed.push(key);
                }
                done.push(u);
            }
            Err(e) => failed.push((key, e)),
        }
    }
    let report = EvaluationReport::from_units(protocol, settings.seed, &done);
    if let Some(dir) = run_dir {
        dir.write_report(&report)?;
    }
    Ok(ExperimentOutcome {
        report,
        resumed,
        failed,
    })
}

fn run_unit_persisted(
    data: &[SubjectRecord],
    unit: &Unit<'_>,
    settings: &ExperimentSettings,
    protocol: Protocol,
    run_dir: Option<&RunDir>,
) -> Result<UnitResult> {
    let (result, model) = run_unit(data, unit, settings)?;
    if let Some(dir) = run_dir {
        dir.store_unit(&result, &model, protocol, settings.seed)?;
    }
    Ok(result)
}

fn require_canonical(data: &[SubjectRecord], what: &str) -> Result<()> {
    match data.iter().find(|s| !s.is_canonical()) {
        Some(s) => Err(Error::precondition(format!(
            "{what} subject `{}` is not canonical; preprocess the dataset first",
            s.subject_id
        ))),
        None => Ok(()),
    }
}

/// Nested cross-validation within one dataset. For every target direction
/// and outer fold: search on the inner folds, retrain the best config on the
/// outer training set, then score training and held-out subjects.
pub fn run_riec_cv(data: &[SubjectRecord], settings: &ExperimentSettings, run_dir: Option<&RunDir>) -> Result<ExperimentOutcome> {
    settings.validate()?;
    require_canonical(data, "dataset")?;
    let plan = make_fold_plan(data.len(), Protocol::RiecCv, settings.seed)?;
    let mut units = Vec::new();
    for &direction in &settings.directions {
        for (f, fold) in plan.folds.iter().enumerate() {
            let scored = fold
                .split
                .train
                .iter()
                .map(|&i| (&data[i], SubjectSet::Train))
                .chain(fold.split.test.iter().map(|&i| (&data[i], SubjectSet::Test)))
                .collect();
            units.push(Unit {
                key: UnitKey { direction, fold: f },
                fold,
                scored,
                monitor: training_pairs(data, &fold.split.test, direction)?,
            });
        }
    }
    execute(data, units, settings, Protocol::RiecCv, run_dir)
}

/// Model selection with 5 folds over `train_data`, retraining on all of it,
/// then scoring on the external subjects. An empty external set gives an
/// empty report without training anything.
pub fn run_transfer(
    train_data: &[SubjectRecord],
    external: &[SubjectRecord],
    settings: &ExperimentSettings,
    run_dir: Option<&RunDir>,
) -> Result<ExperimentOutcome> {
    settings.validate()?;
    if external.is_empty() {
        return Ok(ExperimentOutcome {
            report: EvaluationReport::empty(Protocol::Transfer, settings.seed),
            resumed: Vec::new(),
            failed: Vec::new(),
        });
    }
    require_canonical(train_data, "training")?;
    require_canonical(external, "external")?;
    let plan = make_fold_plan(train_data.len(), Protocol::Transfer, settings.seed)?;
    let fold = &plan.folds[0];

    let mut units = Vec::new();
    for &direction in &settings.directions {
        let monitor = external
            .iter()
            .map(|s| {
                Ok(TrainingPair {
                    input: s.pair(0)?.clone(),
                    target: s.pair(direction)?.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scored = train_data
            .iter()
            .map(|s| (s, SubjectSet::Train))
            .chain(external.iter().map(|s| (s, SubjectSet::External)))
            .collect();
        units.push(Unit {
            key: UnitKey { direction, fold: 0 },
            fold,
            scored,
            monitor,
        });
    }
    execute(train_data, units, settings, Protocol::Transfer, run_dir)
}
