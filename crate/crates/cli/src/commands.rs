use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use hrir_tcn_core::dsp::{self, Direction, Hrir, HrirPair, CANONICAL_BAND, CANONICAL_LEN, CANONICAL_RATE, TARGET_AZIMUTHS};
use hrir_tcn_core::eval::{default_source, render_stimulus, score_session, HrtfType, Stimulus, TrialPlan, TrialResponse};
use hrir_tcn_core::pipeline::dataset::{read_manifest, read_samples, read_subjects, write_dataset, MANIFEST_FILE};
use hrir_tcn_core::pipeline::report::{summarize, write_loss_curve_csv, write_objective_csv};
use hrir_tcn_core::pipeline::synth::{synthetic_dataset, synthetic_subjects};
use hrir_tcn_core::pipeline::{
    generate, hyperparameter_search, load_dataset, with_pool, make_fold_plan, run_riec_cv, run_transfer, score_subjects,
    training_pairs, EvaluationReport, Protocol, RunDir, Source, SubjectRecord, SubjectSet, UnitKey,
};
use hrir_tcn_core::tcn::{checkpoint, train, TcnModel, TrainOptions};
use hrir_tcn_core::{metrics, Error};
use hrir_tcn_service::{ServiceConfig, Sessions, StimulusStore};
use serde_json::json;

use crate::args::{Cli, Command, GlobalArgs, TrainingArgs};
use crate::config::RunConfig;
use crate::{usage, Outcome};

pub fn run(cli: Cli) -> Result<Outcome> {
    let g = &cli.global;
    match cli.command {
        Command::Preprocess { input } => preprocess(&input, RunConfig::load(g)?.out_dir()?),
        Command::Synth { subjects, canonical } => {
            let cfg = RunConfig::load(g)?;
            synth(subjects, canonical, cfg.settings.seed, cfg.out_dir()?)
        }
        Command::Train { training, direction } => train_one(&training_config(g, &training)?, direction),
        Command::Search { training, direction } => search(&training_config(g, &training)?, direction),
        Command::Experiment {
            training,
            protocol,
            external,
        } => {
            let mut cfg = training_config(g, &training)?;
            if let Some(p) = protocol {
                cfg.protocol =
                    Protocol::parse(&p).ok_or_else(|| usage(format!("unknown protocol `{p}` (riec_cv or transfer)")))?;
            }
            if external.is_some() {
                cfg.external = external;
            }
            experiment(&cfg)
        }
        Command::Generate {
            checkpoints,
            left,
            right,
            input_rate,
            truth,
            truth_rate,
            subject_id,
        } => {
            let cfg = RunConfig::load(g)?;
            let ckpt = checkpoint_dir(&cfg, checkpoints)?;
            generate_all(&ckpt, &left, &right, input_rate, truth.as_deref(), truth_rate, &subject_id, cfg.out_dir()?)
        }
        Command::Evaluate {
            checkpoints,
            dataset,
            session,
        } => {
            let cfg = RunConfig::load(g)?;
            match session {
                Some(dir) => rescore_session(&dir, cfg.out.as_deref()),
                None => {
                    let ckpt = checkpoint_dir(&cfg, checkpoints)?;
                    let data = dataset.or(cfg.dataset.clone()).ok_or_else(|| usage("--dataset is required"))?;
                    evaluate(&ckpt, &data, cfg.settings.seed, cfg.out_dir()?)
                }
            }
        }
        Command::Serve {
            checkpoints,
            measured,
            measured_rate,
            host,
            port,
            ui_dir,
            trials_per_condition,
            dry_run,
        } => {
            let cfg = RunConfig::load(g)?;
            let ckpt = checkpoint_dir(&cfg, checkpoints)?;
            let opts = ServeOptions {
                measured: &measured,
                measured_rate,
                host: &host,
                port,
                ui_dir,
                trials_per_condition,
                dry_run,
            };
            serve(&cfg, &ckpt, &opts)
        }
        Command::Convert => {
            print!("{CONVERT_HELP}");
            Ok(Outcome::Done)
        }
    }
}

fn training_config(g: &GlobalArgs, t: &TrainingArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(g)?;
    cfg.apply_training(t);
    cfg.settings.validate()?;
    Ok(cfg)
}

fn checkpoint_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> Result<PathBuf> {
    flag.or_else(|| cfg.checkpoints.clone())
        .ok_or_else(|| usage("a checkpoint directory is required (--checkpoints)"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn preprocess(input: &Path, out: &Path) -> Result<Outcome> {
    let manifest = read_manifest(input)?;
    let subjects = read_subjects(input, &manifest)?;
    let mut done = Vec::new();
    let mut failed = Vec::new();
    for (id, rec) in subjects {
        match rec.and_then(|r| r.preprocessed(manifest.sample_rate)) {
            Ok(r) => done.push(r),
            Err(e) => {
                log::error!("{e}");
                failed.push((id, e.to_string()));
            }
        }
    }
    if done.is_empty() && !failed.is_empty() {
        bail!("every subject failed to preprocess; first error: {}", failed[0].1);
    }
    let idempotent = !manifest.raw && manifest.sample_rate == CANONICAL_RATE;
    let mut provenance: BTreeMap<String, serde_json::Value> = manifest.provenance.clone();
    provenance.insert(
        "preprocess".into(),
        json!({
            "input": input.display().to_string(),
            "source_sample_rate": manifest.sample_rate,
            "input_was_raw": manifest.raw,
            "idempotent": idempotent,
            "resampler": {"kind": "polyphase windowed sinc", "window": "kaiser", "beta": 8.0,
                          "taps_per_phase": 64, "cutoff_fraction_of_lower_rate": 0.45},
            "length": CANONICAL_LEN,
            "sample_rate": CANONICAL_RATE,
            "band_hz": [CANONICAL_BAND.lo_hz, CANONICAL_BAND.hi_hz],
            "band_filter": "2nd-order Butterworth high-pass and low-pass, forward-backward",
            "failed_subjects": failed.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>(),
        }),
    );
    create_dir(out)?;
    write_dataset(out, &done, manifest.source, provenance)?;
    println!(
        "wrote {} canonical subjects to {}{}",
        done.len(),
        out.display(),
        if idempotent { " (input was already canonical; band limit re-applied)" } else { "" }
    );
    if failed.is_empty() {
        Ok(Outcome::Done)
    } else {
        let list: Vec<String> = failed.iter().map(|(_, e)| e.clone()).collect();
        Ok(Outcome::Partial(format!("{} subjects failed:\n  {}", failed.len(), list.join("\n  "))))
    }
}

fn synth(n: usize, canonical: bool, seed: u64, out: &Path) -> Result<Outcome> {
    create_dir(out)?;
    let records: Vec<SubjectRecord> = if canonical {
        synthetic_dataset(n, seed)?
    } else {
        synthetic_subjects(n, seed)
            .iter()
            .map(|s| s.record())
            .collect::<hrir_tcn_core::Result<_>>()?
    };
    let provenance = BTreeMap::from([("synthetic".to_string(), json!({"subjects": n, "seed": seed}))]);
    let m = write_dataset(out, &records, Source::Other, provenance)?;
    println!(
        "wrote {n} synthetic subjects ({} at {} Hz) to {}",
        if m.raw { "raw" } else { "canonical" },
        m.sample_rate,
        out.display()
    );
    Ok(Outcome::Done)
}

fn open_dataset(dir: &Path) -> Result<Vec<SubjectRecord>> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(usage(format!("{} is not a dataset (no {MANIFEST_FILE})", dir.display())));
    }
    Ok(load_dataset(dir)?)
}

fn direction_arg(direction: u32) -> Result<()> {
    if TARGET_AZIMUTHS.contains(&direction) {
        Ok(())
    } else {
        Err(usage(format!("direction must be one of {TARGET_AZIMUTHS:?}, got {direction}")))
    }
}

fn train_one(cfg: &RunConfig, direction: u32) -> Result<Outcome> {
    direction_arg(direction)?;
    let data = open_dataset(cfg.dataset_dir()?)?;
    if data.is_empty() {
        return Err(usage("the dataset has no subjects"));
    }
    let out = cfg.out_dir()?;
    let ckpt_dir = out.join("checkpoints");
    let curves = out.join("curves");
    create_dir(&ckpt_dir)?;
    create_dir(&curves)?;
    let ids: Vec<usize> = (0..data.len()).collect();
    let pairs = training_pairs(&data, &ids, direction)?;
    let config = hrir_tcn_core::tcn::TcnConfig {
        seed: cfg.settings.seed,
        ..cfg.settings.base.clone()
    };
    let opts = TrainOptions {
        record_every: cfg.settings.record_every,
        on_record: Some(&|e| log::info!("epoch {} sd {:.3} dB sdr {:.3} dB", e.epoch, e.train.sd, e.train.sdr)),
        ..TrainOptions::default()
    };
    let (model, record) = with_pool(cfg.settings.workers, || train(&config, &pairs, &opts))??;
    let stem = format!("az{direction:03}");
    let meta = BTreeMap::from([
        ("direction_deg".to_string(), direction.to_string()),
        ("run_seed".to_string(), cfg.settings.seed.to_string()),
        ("subjects".to_string(), data.len().to_string()),
    ]);
    checkpoint::save(ckpt_dir.join(format!("{stem}.ckpt")), &model, &meta)?;
    write_loss_curve_csv(&curves.join(format!("{stem}.csv")), &record)?;
    write_objective_csv(&curves.join(format!("{stem}_objective.csv")), &record)?;
    if let Some(last) = record.last() {
        println!(
            "direction {direction}: final training SD {:.3} dB, SDR {:.3} dB",
            last.train.sd, last.train.sdr
        );
    }
    Ok(Outcome::Done)
}

fn search(cfg: &RunConfig, direction: u32) -> Result<Outcome> {
    direction_arg(direction)?;
    let data = open_dataset(cfg.dataset_dir()?)?;
    let plan = make_fold_plan(data.len(), Protocol::Transfer, cfg.settings.seed)?;
    let outcome = with_pool(cfg.settings.workers, || {
        hyperparameter_search(&data, &plan.folds[0].inner, direction, &cfg.settings, cfg.settings.seed)
    })??;
    let out = cfg.out_dir()?;
    create_dir(out)?;
    write_json(&out.join(format!("search_az{direction:03}.json")), &outcome)?;
    let best = &outcome.trials[outcome.best_index];
    println!(
        "best trial {}: channels {}, layers {}, weight decay {:.3e}, validation cost {:.4}",
        best.index, best.channels, best.layers, best.weight_decay, best.validation_cost
    );
    Ok(Outcome::Done)
}

fn experiment(cfg: &RunConfig) -> Result<Outcome> {
    let data = open_dataset(cfg.dataset_dir()?)?;
    let run = RunDir::create(cfg.out_dir()?)?;
    write_json(&run.root().join("config.json"), cfg)?;
    let outcome = match cfg.protocol {
        Protocol::RiecCv => run_riec_cv(&data, &cfg.settings, Some(&run))?,
        Protocol::Transfer => {
            let ext = cfg.external.as_deref().ok_or_else(|| {
                Error::Precondition("the transfer protocol needs an external dataset (--external)".into())
            })?;
            if !ext.join(MANIFEST_FILE).exists() {
                return Err(Error::Precondition(format!("external dataset {} has no {MANIFEST_FILE}", ext.display())).into());
            }
            let external = load_dataset(ext)?;
            run_transfer(&data, &external, &cfg.settings, Some(&run))?
        }
    };
    for key in &outcome.resumed {
        println!("reused completed unit {}", key.stem());
    }
    print_summary(&outcome.report);
    if outcome.failed.is_empty() {
        Ok(Outcome::Done)
    } else {
        let lines: Vec<String> = outcome.failed.iter().map(|(k, e)| format!("{}: {e}", k.stem())).collect();
        Ok(Outcome::Partial(format!("{} units failed:\n  {}", lines.len(), lines.join("\n  "))))
    }
}

fn print_summary(report: &EvaluationReport) {
    println!("direction  set       n    SD dB  SDR dB  baseline SD dB");
    for g in &report.summary {
        println!(
            "{:>9}  {:<8} {:>3} {:>8.3} {:>7.3} {:>15.3}",
            g.direction,
            g.set.as_str(),
            g.n,
            g.mean_sd_db,
            g.mean_sdr_db,
            g.mean_baseline_sd_db
        );
    }
}

/// `az060.ckpt` ... `az300.ckpt` from `dir`, checked against their metadata.
fn load_checkpoints(dir: &Path) -> Result<BTreeMap<u32, TcnModel>> {
    let missing: Vec<String> = TARGET_AZIMUTHS
        .iter()
        .map(|d| dir.join(format!("az{d:03}.ckpt")))
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(usage(format!("missing direction checkpoints: {}", missing.join(", "))));
    }
    TARGET_AZIMUTHS
        .iter()
        .map(|&d| {
            let c = checkpoint::load(dir.join(format!("az{d:03}.ckpt")))?;
            if let Some(meta) = c.metadata.get("direction_deg") {
                if meta != &d.to_string() {
                    return Err(usage(format!("az{d:03}.ckpt was trained for direction {meta}")));
                }
            }
            Ok((d, c.model))
        })
        .collect()
}

fn ear_file(dir: &Path, az: u32, ear: &str) -> Option<PathBuf> {
    ["f32", "wav", "WAV"]
        .iter()
        .map(|ext| dir.join(format!("az{az:03}_{ear}.{ext}")))
        .find(|p| p.exists())
}

fn read_pair(left: &Path, right: &Path, rate: u32, az: u32) -> Result<HrirPair> {
    let ear = |p: &Path| -> Result<Hrir> {
        Hrir::new(read_samples(p, rate)?, rate).with_context(|| format!("reading {}", p.display()))
    };
    let pair = HrirPair::new(ear(left)?, ear(right)?, Direction::azimuth(az as f64))?;
    if rate == CANONICAL_RATE {
        Ok(pair)
    } else {
        Ok(dsp::preprocess(&pair, rate)?)
    }
}

/// Pairs for `azimuths` from a directory of `azNNN_left/right` files; the
/// error names every missing file.
fn read_pair_dir(dir: &Path, rate: u32, azimuths: &[u32], what: &str) -> Result<BTreeMap<u32, HrirPair>> {
    let mut missing = Vec::new();
    let mut files = BTreeMap::new();
    for &az in azimuths {
        match (ear_file(dir, az, "left"), ear_file(dir, az, "right")) {
            (Some(l), Some(r)) => {
                files.insert(az, (l, r));
            }
            _ => missing.push(format!("{what} {az:03} deg")),
        }
    }
    if !missing.is_empty() {
        return Err(usage(format!(
            "{} lacks azNNN_left/right files for: {}",
            dir.display(),
            missing.join(", ")
        )));
    }
    files
        .into_iter()
        .map(|(az, (l, r))| Ok((az, read_pair(&l, &r, rate, az)?)))
        .collect()
}

fn sd_db(a: &Hrir, b: &Hrir) -> Result<f64> {
    let fa = dsp::magnitude_spectrum(a, dsp::SD_TRANSFORM_SIZE, CANONICAL_BAND)?;
    let fb = dsp::magnitude_spectrum(b, dsp::SD_TRANSFORM_SIZE, CANONICAL_BAND)?;
    Ok(metrics::spectral_distortion(&fa, &fb)?)
}

#[allow(clippy::too_many_arguments)]
fn generate_all(
    ckpt_dir: &Path,
    left: &Path,
    right: &Path,
    input_rate: u32,
    truth: Option<&Path>,
    truth_rate: u32,
    subject_id: &str,
    out: &Path,
) -> Result<Outcome> {
    let models = load_checkpoints(ckpt_dir)?;
    let input = read_pair(left, right, input_rate, 0)?;
    let mut pairs = BTreeMap::from([(0u32, input.clone())]);
    for (&d, model) in &models {
        pairs.insert(d, generate(model, &input, Direction::azimuth(d as f64))?);
    }
    create_dir(out)?;
    let record = SubjectRecord {
        subject_id: subject_id.to_owned(),
        pairs,
        source: Source::Other,
    };
    let provenance = BTreeMap::from([(
        "generated".to_string(),
        json!({"checkpoints": ckpt_dir.display().to_string(), "input_left": left.display().to_string(),
               "input_right": right.display().to_string()}),
    )]);
    write_dataset(out, std::slice::from_ref(&record), Source::Other, provenance)?;
    println!("wrote {} generated pairs to {}", models.len(), out.join(subject_id).display());

    if let Some(truth_dir) = truth {
        let measured = read_pair_dir(truth_dir, truth_rate, &TARGET_AZIMUTHS, "measured")?;
        let path = out.join("metrics.csv");
        let mut text = String::from("direction,ear,sd_db,sdr_db,baseline_sd_db,baseline_sdr_db\n");
        for (&d, target) in &measured {
            let g = &record.pairs[&d];
            for (ear, t, y, x) in [
                ("left", &target.left, &g.left, &input.left),
                ("right", &target.right, &g.right, &input.right),
            ] {
                text += &format!(
                    "{d},{ear},{},{},{},{}\n",
                    sd_db(t, y)?,
                    metrics::sdr(t, y)?,
                    sd_db(t, x)?,
                    metrics::sdr(t, x)?
                );
            }
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(Outcome::Done)
}

fn evaluate(ckpt_dir: &Path, dataset: &Path, seed: u64, out: &Path) -> Result<Outcome> {
    let models = load_checkpoints(ckpt_dir)?;
    let data = open_dataset(dataset)?;
    let subjects: Vec<&SubjectRecord> = data.iter().collect();
    let mut rows = Vec::new();
    for (&d, model) in &models {
        rows.extend(score_subjects(model, &subjects, UnitKey { direction: d, fold: 0 }, SubjectSet::External)?);
    }
    let report = EvaluationReport {
        summary: summarize(&rows),
        rows,
        ..EvaluationReport::empty(Protocol::Transfer, seed)
    };
    create_dir(out)?;
    report.write_rows_csv(&out.join("report.csv"))?;
    report.write_summary_json(&out.join("summary.json"))?;
    print_summary(&report);
    Ok(Outcome::Done)
}

fn rescore_session(dir: &Path, out: Option<&Path>) -> Result<Outcome> {
    let plan_path = dir.join("plan.json");
    let plan: TrialPlan = serde_json::from_str(
        &fs::read_to_string(&plan_path).with_context(|| format!("reading {}", plan_path.display()))?,
    )?;
    let log_path = dir.join("responses.jsonl");
    let responses = fs::read_to_string(&log_path)
        .with_context(|| format!("reading {}", log_path.display()))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str::<TrialResponse>)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let result = score_session(&plan, &responses)?;
    let out = out.unwrap_or(dir);
    create_dir(out)?;
    result.write_trials_csv(&out.join("trials.csv"))?;
    result.write_json(&out.join("summary.json"))?;
    println!("hrtf type   direction  n  error deg  confusion %");
    for c in &result.conditions {
        println!(
            "{:<10} {:>9} {:>3} {:>10.2} {:>12.1}",
            c.hrtf_type.as_str(),
            c.direction,
            c.n,
            c.mean_error_deg,
            c.confusion_pct
        );
    }
    Ok(Outcome::Done)
}

struct ServeOptions<'a> {
    measured: &'a Path,
    measured_rate: u32,
    host: &'a str,
    port: u16,
    ui_dir: Option<PathBuf>,
    trials_per_condition: usize,
    dry_run: bool,
}

/// Measured and generated stimuli for all five directions.
fn render_all(ckpt_dir: &Path, opts: &ServeOptions<'_>, seed: u64) -> Result<Vec<Stimulus>> {
    let mut azimuths = vec![0];
    azimuths.extend(TARGET_AZIMUTHS);
    let measured = read_pair_dir(opts.measured, opts.measured_rate, &azimuths, "measured")?;
    let models = load_checkpoints(ckpt_dir)?;
    let source = default_source(seed);
    let mut out = Vec::new();
    for &d in &TARGET_AZIMUTHS {
        let generated = generate(&models[&d], &measured[&0], Direction::azimuth(d as f64))?;
        for (ty, pair) in [(HrtfType::Measured, &measured[&d]), (HrtfType::Generated, &generated)] {
            out.push(render_stimulus(format!("{}-{d:03}", ty.as_str()), &source, pair, ty)?);
        }
    }
    Ok(out)
}

fn serve(cfg: &RunConfig, ckpt_dir: &Path, opts: &ServeOptions<'_>) -> Result<Outcome> {
    let stimuli = render_all(ckpt_dir, opts, cfg.settings.seed)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("listening-test"));
    if opts.dry_run {
        let dir = out.join("stimuli");
        create_dir(&dir)?;
        for s in &stimuli {
            let path = dir.join(format!("{}.wav", s.stimulus_id));
            fs::write(&path, s.wav()?).with_context(|| format!("writing {}", path.display()))?;
        }
        println!("wrote {} stimuli to {}", stimuli.len(), dir.display());
        return Ok(Outcome::Done);
    }
    let store = Arc::new(StimulusStore::new(stimuli).map_err(|e| usage(e.to_string()))?);
    let config = ServiceConfig {
        trials_per_condition: opts.trials_per_condition,
        results_dir: Some(out.join("sessions")),
    };
    let sessions = Arc::new(Sessions::new(store, config).map_err(|e| usage(e.to_string()))?);
    let addr: SocketAddr = format!("{}:{}", opts.host, opts.port)
        .parse()
        .map_err(|e| usage(format!("bad listen address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot listen on {addr}"))?;
        println!("listening test at http://{}", listener.local_addr()?);
        axum_serve(listener, sessions, opts.ui_dir.clone()).await
    })?;
    Ok(Outcome::Done)
}

async fn axum_serve(
    listener: tokio::net::TcpListener,
    sessions: Arc<Sessions>,
    ui_dir: Option<PathBuf>,
) -> Result<()> {
    hrir_tcn_service::serve_on(listener, sessions, ui_dir).await?;
    Ok(())
}

const CONVERT_HELP: &str = "\
Measurement sets distributed as SOFA (HDF5) files are converted outside this
tool. The dataset layout expected by `preprocess`, `experiment` and friends is

  <dataset>/manifest.json
  <dataset>/<subject>/az000_left.f32   (or .wav)
  <dataset>/<subject>/az000_right.f32
  ... one pair per azimuth 0, 60, 120, 180, 240, 300 at elevation 0

with a manifest like

  {
    \"sample_rate\": 48000,
    \"raw\": true,
    \"source\": \"riec\",
    \"subjects\": [
      {\"id\": \"subj001\", \"directions\": [
        {\"azimuth_deg\": 0, \"left\": \"subj001/az000_left.f32\", \"right\": \"subj001/az000_right.f32\"},
        ...
      ]}
    ]
  }

Sample files are little-endian 32-bit float arrays or mono WAV (float or
integer PCM). One way to export with Python:

  import h5py, numpy as np
  with h5py.File(\"subj001.sofa\") as f:
      ir = f[\"Data.IR\"][:]            # measurements x receivers x samples
      pos = f[\"SourcePosition\"][:]    # azimuth, elevation, distance
      fs = int(f[\"Data.SamplingRate\"][0])
  for az in (0, 60, 120, 180, 240, 300):
      m = np.argmin(np.abs((pos[:, 0] - az + 180) % 360 - 180) + np.abs(pos[:, 1]))
      ir[m, 0].astype(\"<f4\").tofile(f\"subj001/az{az:03d}_left.f32\")
      ir[m, 1].astype(\"<f4\").tofile(f\"subj001/az{az:03d}_right.f32\")

Check the container's azimuth convention: this tool counts azimuth clockwise
from the front (90 = right ear). SOFA files usually count counter-clockwise,
in which case write SOFA azimuth (360 - az) % 360 to azNNN.

Then run `hrir-tcn preprocess --input <dataset> --out <canonical>`.
";
