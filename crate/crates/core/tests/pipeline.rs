use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use hrir_tcn_core::dsp::GRID_AZIMUTHS;
use hrir_tcn_core::pipeline::dataset::{read_samples, write_dataset, write_raw_f32, MANIFEST_FILE};
use hrir_tcn_core::pipeline::synth::{synthetic_dataset, synthetic_subjects, RAW_LEN, RAW_RATE};
use hrir_tcn_core::pipeline::{
    load_dataset, make_fold_plan, random_search, run_riec_cv, run_transfer, training_pairs, ExperimentSettings,
    Protocol, RunDir, SearchSpace, Source, SubjectRecord, SubjectSet,
};
use hrir_tcn_core::tcn::{checkpoint, train, TcnConfig, TrainOptions};
use hrir_tcn_core::Error;
use proptest::prelude::*;

fn raw_records(n: usize) -> Vec<SubjectRecord> {
    synthetic_subjects(n, 21).iter().map(|s| s.record().unwrap()).collect()
}

#[test]
fn raw_dataset_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let records = raw_records(3);
    let manifest = write_dataset(dir.path(), &records, Source::Other, BTreeMap::new()).unwrap();
    assert!(manifest.raw);
    assert_eq!(manifest.sample_rate, RAW_RATE);
    let loaded = load_dataset(dir.path()).unwrap();
    assert_eq!(loaded.len(), 3);
    let ids: Vec<&str> = loaded.iter().map(|r| r.subject_id.as_str()).collect();
    assert_eq!(ids, ["SYN000", "SYN001", "SYN002"]);
    for rec in &loaded {
        assert_eq!(rec.pairs.keys().copied().collect::<Vec<_>>(), GRID_AZIMUTHS);
        assert!(rec.is_canonical());
    }
}

#[test]
fn canonical_dataset_loads_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic_dataset(2, 4).unwrap();
    let manifest = write_dataset(dir.path(), &data, Source::Riec, BTreeMap::new()).unwrap();
    assert!(!manifest.raw);
    let loaded = load_dataset(dir.path()).unwrap();
    for (a, b) in data.iter().zip(&loaded) {
        assert_eq!(b.source, a.source);
        for (az, p) in &a.pairs {
            let q = &b.pairs[az];
            for (x, y) in p.left.samples().iter().zip(q.left.samples()) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
    }
}

#[test]
fn empty_manifest_is_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join(MANIFEST_FILE),
        r#"{"sample_rate": 44100, "raw": false, "subjects": []}"#,
    )
    .unwrap();
    assert!(load_dataset(dir.path()).unwrap().is_empty());
}

fn edit_manifest(dir: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let path = dir.join(MANIFEST_FILE);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    f(&mut v);
    fs::write(path, v.to_string()).unwrap();
}

#[test]
fn missing_direction_names_subject_and_direction() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &raw_records(2), Source::Other, BTreeMap::new()).unwrap();
    edit_manifest(dir.path(), |v| {
        let dirs = v["subjects"][1]["directions"].as_array_mut().unwrap();
        dirs.retain(|d| d["azimuth_deg"] != 120);
    });
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Dataset { .. }));
    let msg = err.to_string();
    assert!(msg.contains("SYN001") && msg.contains("120"), "{msg}");
}

#[test]
fn duplicate_ids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &raw_records(2), Source::Other, BTreeMap::new()).unwrap();
    edit_manifest(dir.path(), |v| v["subjects"][1]["id"] = "SYN000".into());
    let msg = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(msg.contains("SYN000") && msg.contains("duplicate"), "{msg}");
}

#[test]
fn wrong_length_without_raw_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &raw_records(1), Source::Other, BTreeMap::new()).unwrap();
    edit_manifest(dir.path(), |v| {
        v["raw"] = false.into();
        v["sample_rate"] = 44100.into();
    });
    let msg = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(msg.contains("SYN000") && msg.contains("512"), "{msg}");
}

#[test]
fn corrupt_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &raw_records(1), Source::Other, BTreeMap::new()).unwrap();
    let victim = dir.path().join("SYN000").join("az180_right.f32");
    assert!(victim.exists());
    fs::write(&victim, [1u8, 2, 3]).unwrap();
    let msg = load_dataset(dir.path()).unwrap_err().to_string();
    assert!(msg.contains("SYN000") && msg.contains("direction 180 right"), "{msg}");
}

#[test]
fn wav_and_raw_samples_agree() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<f64> = (0..RAW_LEN).map(|i| ((i as f64) * 0.05).sin() * 0.5).collect();
    let raw = dir.path().join("x.f32");
    write_raw_f32(&raw, &samples).unwrap();

    let float_wav = dir.path().join("x.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: RAW_RATE,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(&float_wav, spec).unwrap();
    samples.iter().for_each(|&v| w.write_sample(v as f32).unwrap());
    w.finalize().unwrap();

    let int_wav = dir.path().join("y.WAV");
    let spec = hound::WavSpec {
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
        ..spec
    };
    let mut w = hound::WavWriter::create(&int_wav, spec).unwrap();
    samples
        .iter()
        .for_each(|&v| w.write_sample((v * 32768.0).round() as i16).unwrap());
    w.finalize().unwrap();

    let a = read_samples(&raw, RAW_RATE).unwrap();
    let b = read_samples(&float_wav, RAW_RATE).unwrap();
    let c = read_samples(&int_wav, RAW_RATE).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1.0 / 32768.0));
    let err = read_samples(&float_wav, 44100).unwrap_err().to_string();
    assert!(err.contains("48000"), "{err}");
}

fn assert_disjoint(train: &[usize], test: &[usize]) {
    let a: BTreeSet<_> = train.iter().collect();
    assert!(test.iter().all(|t| !a.contains(t)), "leak between {train:?} and {test:?}");
}

#[test]
fn fold_sizes_at_full_scale() {
    let plan = make_fold_plan(105, Protocol::RiecCv, 3).unwrap();
    assert_eq!(plan.folds.len(), 4);
    let mut tested = BTreeSet::new();
    for f in &plan.folds {
        assert_eq!((f.split.train.len(), f.split.test.len()), (84, 21));
        assert_disjoint(&f.split.train, &f.split.test);
        assert!(f.split.test.iter().all(|&t| tested.insert(t)), "outer test sets overlap");
        assert_eq!(f.inner.len(), 4);
        let mut validated = BTreeSet::new();
        for s in &f.inner {
            assert_eq!((s.train.len(), s.test.len()), (63, 21));
            assert_disjoint(&s.train, &s.test);
            let outer: BTreeSet<_> = f.split.train.iter().collect();
            assert!(s.train.iter().chain(&s.test).all(|i| outer.contains(i)));
            validated.extend(s.test.iter().copied());
        }
        assert_eq!(validated.len(), 84);
    }

    let plan = make_fold_plan(105, Protocol::Transfer, 3).unwrap();
    let inner = &plan.folds[0].inner;
    assert_eq!(inner.len(), 5);
    let mut validated = BTreeSet::new();
    for s in inner {
        assert_eq!((s.train.len(), s.test.len()), (84, 21));
        assert_disjoint(&s.train, &s.test);
        validated.extend(s.test.iter().copied());
    }
    assert_eq!(validated.len(), 105);
}

#[test]
fn fold_plan_is_seeded_and_rejects_tiny_sets() {
    assert_eq!(
        make_fold_plan(105, Protocol::RiecCv, 9).unwrap(),
        make_fold_plan(105, Protocol::RiecCv, 9).unwrap()
    );
    assert_ne!(
        make_fold_plan(105, Protocol::RiecCv, 9).unwrap(),
        make_fold_plan(105, Protocol::RiecCv, 10).unwrap()
    );
    assert!(make_fold_plan(4, Protocol::RiecCv, 0).is_err());
    assert!(make_fold_plan(4, Protocol::Transfer, 0).is_err());
    let small = make_fold_plan(12, Protocol::RiecCv, 0).unwrap();
    assert_eq!((small.folds[0].split.train.len(), small.folds[0].split.test.len()), (10, 2));
    assert_eq!((small.folds[0].inner[0].train.len(), small.folds[0].inner[0].test.len()), (8, 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn folds_never_leak(n in 5usize..200, seed in any::<u64>()) {
        for protocol in [Protocol::RiecCv, Protocol::Transfer] {
            let plan = make_fold_plan(n, protocol, seed).unwrap();
            let mut tested = BTreeSet::new();
            for f in &plan.folds {
                let tr: BTreeSet<_> = f.split.train.iter().copied().collect();
                prop_assert!(f.split.test.iter().all(|t| !tr.contains(t)));
                prop_assert_eq!(tr.len() + f.split.test.len(), n);
                prop_assert!(f.split.test.iter().all(|&t| tested.insert(t)));
                for s in &f.inner {
                    let fit: BTreeSet<_> = s.train.iter().copied().collect();
                    prop_assert!(s.test.iter().all(|t| !fit.contains(t) && tr.contains(t)));
                    prop_assert_eq!(fit.len() + s.test.len(), tr.len());
                    prop_assert!(!s.test.is_empty());
                }
            }
        }
    }
}

fn toy_config(channels: usize, layers: usize, epochs: usize) -> TcnConfig {
    TcnConfig {
        channels,
        layers,
        epochs,
        dropout: 0.0,
        ..TcnConfig::default()
    }
}

#[test]
fn search_picks_the_exhaustively_best_trial() {
    let data = synthetic_dataset(2, 8).unwrap();
    let pairs = training_pairs(&data, &[0, 1], 120).unwrap();
    let space = SearchSpace {
        channels: (2, 12),
        layers: (1, 3),
        weight_decay: (1e-6, 1e-6),
        learning_rate: Some((1e-3, 1e-2)),
    };
    let score = |c: &TcnConfig| {
        let opts = TrainOptions {
            record_every: 0,
            validation: &pairs,
            ..TrainOptions::default()
        };
        let (_, r) = train(c, &pairs, &opts)?;
        Ok(r.last().unwrap().validation.unwrap().cost)
    };
    let base = toy_config(4, 2, 60);
    let outcome = random_search(&space, &base, 5, 77, |_, c| score(c)).unwrap();
    let costs: Vec<f64> = outcome
        .trials
        .iter()
        .map(|t| {
            let c = TcnConfig {
                channels: t.channels,
                layers: t.layers,
                weight_decay: t.weight_decay,
                learning_rate: t.learning_rate,
                ..base.clone()
            };
            score(&c).unwrap()
        })
        .collect();
    let best = (0..costs.len()).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap();
    assert_eq!(outcome.best_index, best, "costs {costs:?}");
    assert_eq!(outcome.trials[best].rank, 1);
    assert_eq!(outcome.trials[best].validation_cost, costs[best]);
}

fn tiny_settings(seed: u64) -> ExperimentSettings {
    ExperimentSettings {
        base: toy_config(4, 2, 12),
        space: SearchSpace {
            channels: (3, 5),
            layers: (1, 2),
            weight_decay: (1e-6, 1e-4),
            learning_rate: None,
        },
        n_trials: 2,
        search_epochs: Some(4),
        directions: vec![60, 240],
        record_every: 5,
        workers: Some(2),
        seed,
        check_ranges: false,
    }
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn riec_cv_writes_full_schema_and_resumes() {
    let data = synthetic_dataset(6, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = RunDir::create(dir.path()).unwrap();
    let settings = tiny_settings(5);
    let out = run_riec_cv(&data, &settings, Some(&run)).unwrap();
    assert!(out.failed.is_empty() && out.resumed.is_empty());
    let report = &out.report;
    assert_eq!(report.units.len(), 2 * 4);
    // 6 subjects: 1 tested and 5 trained per fold, two ears each
    assert_eq!(report.rows.iter().filter(|r| r.set == SubjectSet::Test).count(), 2 * 4 * 2);
    assert_eq!(report.rows.iter().filter(|r| r.set == SubjectSet::Train).count(), 2 * 4 * 5 * 2);
    for g in &report.summary {
        let rows: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.direction == g.direction && r.set == g.set)
            .collect();
        let mean = rows.iter().map(|r| r.sd_db).sum::<f64>() / rows.len() as f64;
        assert!((mean - g.mean_sd_db).abs() < 1e-9);
    }

    let files = tree(dir.path());
    for name in ["report.csv", "summary.json", "units/az060_fold0.json", "checkpoints/az240_fold3.ckpt"] {
        assert!(files.contains_key(name), "missing {name}");
    }
    for name in ["curves/az060_fold2.csv", "curves/az060_fold2_objective.csv", "search/az240_fold1.json"] {
        assert!(files.contains_key(name), "missing {name}");
    }
    let header = String::from_utf8(files["report.csv"].clone()).unwrap();
    assert!(header.starts_with("subject_id,direction,fold,set,ear,sd_db,sdr_db,baseline_sd_db,baseline_sdr_db"));
    let ckpt = checkpoint::load(dir.path().join("checkpoints/az240_fold3.ckpt")).unwrap();
    assert_eq!(ckpt.metadata["direction_deg"], "240");
    assert_eq!(ckpt.metadata["protocol"], "riec_cv");

    // a removed unit is recomputed, the rest are reused
    fs::remove_file(run.unit_path(hrir_tcn_core::pipeline::UnitKey { direction: 60, fold: 1 })).unwrap();
    let again = run_riec_cv(&data, &settings, Some(&run)).unwrap();
    assert_eq!(again.resumed.len(), 7);
    assert_eq!(again.report, out.report);
    assert_eq!(tree(dir.path()), files);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let data = synthetic_dataset(5, 3).unwrap();
    let settings = ExperimentSettings {
        directions: vec![180],
        ..tiny_settings(11)
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_riec_cv(&data, &settings, Some(&RunDir::create(d.path()).unwrap())).unwrap();
    }
    assert_eq!(tree(dirs[0].path()), tree(dirs[1].path()));
    let same = run_riec_cv(&data, &settings, None).unwrap();
    let other = run_riec_cv(&data, &ExperimentSettings { seed: 12, ..settings }, None).unwrap();
    assert_ne!(same.report.rows, other.report.rows);
}

#[test]
fn transfer_scores_external_subjects() {
    let train_data = synthetic_dataset(5, 6).unwrap();
    let mut external = synthetic_dataset(2, 60).unwrap();
    for (i, s) in external.iter_mut().enumerate() {
        s.subject_id = format!("EXT{i}");
    }
    let settings = ExperimentSettings {
        directions: vec![300],
        ..tiny_settings(1)
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_transfer(&train_data, &external, &settings, Some(&RunDir::create(dir.path()).unwrap())).unwrap();
    let ext: Vec<_> = out.report.rows.iter().filter(|r| r.set == SubjectSet::External).collect();
    assert_eq!(ext.len(), 4);
    assert!(ext.iter().all(|r| r.subject_id.starts_with("EXT")));
    assert_eq!(out.report.units.len(), 1);
    assert!(dir.path().join("checkpoints/az300.ckpt").exists());
    assert_eq!(out.report.protocol, Protocol::Transfer);

    let empty = run_transfer(&train_data, &[], &settings, None).unwrap();
    assert!(empty.report.rows.is_empty() && empty.report.units.is_empty());
}

#[test]
fn experiments_require_canonical_data() {
    let raw = raw_records(5);
    let err = run_riec_cv(&raw, &tiny_settings(0), None).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
    let bad = ExperimentSettings {
        directions: vec![90],
        ..tiny_settings(0)
    };
    assert!(run_riec_cv(&synthetic_dataset(5, 1).unwrap(), &bad, None).is_err());
    let checked = ExperimentSettings {
        check_ranges: true,
        ..tiny_settings(0)
    };
    assert!(run_riec_cv(&synthetic_dataset(5, 1).unwrap(), &checked, None).is_err());
}
