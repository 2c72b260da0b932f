use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::folds::Protocol;
use super::search::SearchOutcome;
use crate::error::{Error, Result};
use crate::tcn::{TcnConfig, TrainRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ear {
    Left,
    Right,
}

impl Ear {
    pub const BOTH: [Ear; 2] = [Ear::Left, Ear::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Ear::Left => "left",
            Ear::Right => "right",
        }
    }
}

/// Which subjects a row was generated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectSet {
    Train,
    Test,
    External,
}

impl SubjectSet {
    pub fn as_str(self) -> &'static str {
        match self {
            SubjectSet::Train => "train",
            SubjectSet::Test => "test",
            SubjectSet::External => "external",
        }
    }
}

/// Scores of one generated ear. The baseline columns compare the subject's
/// own 0 degree HRIR against the same target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub subject_id: String,
    pub direction: u32,
    pub fold: usize,
    pub set: SubjectSet,
    pub ear: Ear,
    pub sd_db: f64,
    pub sdr_db: f64,
    pub baseline_sd_db: f64,
    pub baseline_sdr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub direction: u32,
    pub set: SubjectSet,
    /// Rows averaged (subjects x ears x folds).
    pub n: usize,
    pub mean_sd_db: f64,
    pub mean_sdr_db: f64,
    pub mean_baseline_sd_db: f64,
    pub mean_baseline_sdr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitKey {
    pub direction: u32,
    pub fold: usize,
}

impl UnitKey {
    pub fn stem(&self) -> String {
        format!("az{:03}_fold{}", self.direction, self.fold)
    }
}

/// Everything produced by one (direction, fold) work unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub key: UnitKey,
    pub search: SearchOutcome,
    pub config: TcnConfig,
    pub record: TrainRecord,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSummary {
    pub direction: u32,
    pub fold: usize,
    pub config: TcnConfig,
    pub best_trial: usize,
    pub best_validation_cost: Option<f64>,
    pub final_train_sd_db: Option<f64>,
    pub final_train_sdr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub protocol: Protocol,
    pub seed: u64,
    pub units: Vec<UnitSummary>,
    pub summary: Vec<GroupSummary>,
    pub rows: Vec<ReportRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Per (direction, set) means of `rows`, ordered by direction then set.
pub fn summarize(rows: &[ReportRow]) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(u32, SubjectSet), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.direction, r.set)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((direction, set), g)| GroupSummary {
            direction,
            set,
            n: g.len(),
            mean_sd_db: mean(g.iter().map(|r| r.sd_db)),
            mean_sdr_db: mean(g.iter().map(|r| r.sdr_db)),
            mean_baseline_sd_db: mean(g.iter().map(|r| r.baseline_sd_db)),
            mean_baseline_sdr_db: mean(g.iter().map(|r| r.baseline_sdr_db)),
        })
        .collect()
}

impl EvaluationReport {
    pub fn empty(protocol: Protocol, seed: u64) -> Self {
        Self {
            protocol,
            seed,
            units: Vec::new(),
            summary: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Assembles a report from unit results, sorted by unit key.
    pub fn from_units(protocol: Protocol, seed: u64, units: &[UnitResult]) -> Self {
        let mut units: Vec<&UnitResult> = units.iter().collect();
        units.sort_by_key(|u| u.key);
        let rows: Vec<ReportRow> = units.iter().flat_map(|u| u.rows.iter().cloned()).collect();
        let summaries = units
            .iter()
            .map(|u| {
                let last = u.record.last();
                let best = &u.search.trials[u.search.best_index];
                UnitSummary {
                    direction: u.key.direction,
                    fold: u.key.fold,
                    config: u.config.clone(),
                    best_trial: u.search.best_index,
                    best_validation_cost: best.validation_cost.is_finite().then_some(best.validation_cost),
                    final_train_sd_db: last.map(|e| e.train.sd),
                    final_train_sdr_db: last.map(|e| e.train.sdr),
                }
            })
            .collect();
        Self {
            protocol,
            seed,
            units: summaries,
            summary: summarize(&rows),
            rows,
        }
    }

    pub fn group(&self, direction: u32, set: SubjectSet) -> Option<&GroupSummary> {
        self.summary.iter().find(|g| g.direction == direction && g.set == set)
    }

    /// Mean over all rows of one set.
    pub fn overall(&self, set: SubjectSet) -> Option<GroupSummary> {
        let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.set == set).collect();
        (!rows.is_empty()).then(|| GroupSummary {
            direction: 0,
            set,
            n: rows.len(),
            mean_sd_db: mean(rows.iter().map(|r| r.sd_db)),
            mean_sdr_db: mean(rows.iter().map(|r| r.sdr_db)),
            mean_baseline_sd_db: mean(rows.iter().map(|r| r.baseline_sd_db)),
            mean_baseline_sdr_db: mean(rows.iter().map(|r| r.baseline_sdr_db)),
        })
    }

    pub fn write_rows_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for r in &self.rows {
            w.serialize(r).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// JSON summary without the per-row table.
    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        let overall: Vec<GroupSummary> = [SubjectSet::Train, SubjectSet::Test, SubjectSet::External]
            .into_iter()
            .filter_map(|s| self.overall(s))
            .collect();
        let value = serde_json::json!({
            "protocol": self.protocol,
            "seed": self.seed,
            "units": self.units,
            "by_direction": self.summary,
            "overall": overall,
        });
        write_json(path, &value)
    }
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Eval-mode curve: one row per recorded epoch.
pub fn write_loss_curve_csv(path: &Path, record: &TrainRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "epoch",
        "train_cost",
        "train_sd_db",
        "train_sdr_db",
        "validation_cost",
        "validation_sd_db",
        "validation_sdr_db",
    ])
    .map_err(|e| csv_error(path, e))?;
    for e in &record.entries {
        let v = e.validation;
        let opt = |x: Option<f64>| x.map_or(String::new(), |x| x.to_string());
        w.write_record([
            e.epoch.to_string(),
            e.train.cost.to_string(),
            e.train.sd.to_string(),
            e.train.sdr.to_string(),
            opt(v.map(|v| v.cost)),
            opt(v.map(|v| v.sd)),
            opt(v.map(|v| v.sdr)),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Train-mode objective, one row per epoch.
pub fn write_objective_csv(path: &Path, record: &TrainRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["epoch", "objective"]).map_err(|e| csv_error(path, e))?;
    for (i, v) in record.objective.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(direction: u32, set: SubjectSet, sd: f64, sdr: f64) -> ReportRow {
        ReportRow {
            subject_id: "s".into(),
            direction,
            fold: 0,
            set,
            ear: Ear::Left,
            sd_db: sd,
            sdr_db: sdr,
            baseline_sd_db: sd + 1.0,
            baseline_sdr_db: sdr - 1.0,
        }
    }

    #[test]
    fn groups_by_direction_and_set() {
        let rows = vec![
            row(120, SubjectSet::Test, 4.0, 1.0),
            row(60, SubjectSet::Test, 2.0, 3.0),
            row(60, SubjectSet::Test, 6.0, -1.0),
            row(60, SubjectSet::Train, 1.0, 0.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].direction, s[0].set, s[0].n), (60, SubjectSet::Train, 1));
        assert_eq!((s[1].direction, s[1].set, s[1].n), (60, SubjectSet::Test, 2));
        assert_eq!(s[1].mean_sd_db, 4.0);
        assert_eq!(s[1].mean_sdr_db, 1.0);
        assert_eq!(s[1].mean_baseline_sd_db, 5.0);
    }

    proptest! {
        #[test]
        fn summaries_recompute_from_rows(
            items in prop::collection::vec((0usize..5, any::<bool>(), -30.0f64..30.0, -30.0f64..30.0), 1..60)
        ) {
            let rows: Vec<ReportRow> = items
                .iter()
                .map(|&(d, test, sd, sdr)| {
                    row(60 * (d as u32 + 1), if test { SubjectSet::Test } else { SubjectSet::Train }, sd.abs(), sdr)
                })
                .collect();
            for g in summarize(&rows) {
                let members: Vec<&ReportRow> =
                    rows.iter().filter(|r| r.direction == g.direction && r.set == g.set).collect();
                let sd = members.iter().map(|r| r.sd_db).sum::<f64>() / members.len() as f64;
                let sdr = members.iter().map(|r| r.sdr_db).sum::<f64>() / members.len() as f64;
                prop_assert_eq!(g.n, members.len());
                prop_assert!((g.mean_sd_db - sd).abs() <= 1e-9);
                prop_assert!((g.mean_sdr_db - sdr).abs() <= 1e-9);
            }
        }
    }
}
