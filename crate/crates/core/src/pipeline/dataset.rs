//! Dataset directories: a `manifest.json` plus one sample file per ear and
//! direction.
//!
//! ```json
//! {
//!   "sample_rate": 48000,
//!   "raw": true,
//!   "source": "riec",
//!   "subjects": [
//!     { "id": "S001",
//!       "directions": [
//!         { "azimuth_deg": 0, "left": "S001/az000_left.f32", "right": "S001/az000_right.f32" }
//!       ] }
//!   ]
//! }
//! ```
//!
//! Sample files ending in `.wav` are read as mono RIFF/WAVE (float or integer
//! PCM scaled to [-1, 1]); anything else is a raw little-endian `f32` array.
//! Paths are relative to the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::{self, Direction, Hrir, HrirPair, CANONICAL_LEN, CANONICAL_RATE, GRID_AZIMUTHS};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Riec,
    Nut,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate: u32,
    pub raw: bool,
    #[serde(default = "default_source")]
    pub source: Source,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub provenance: BTreeMap<String, serde_json::Value>,
    pub subjects: Vec<ManifestSubject>,
}

fn default_source() -> Source {
    Source::Other
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    pub directions: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub azimuth_deg: u32,
    pub left: PathBuf,
    pub right: PathBuf,
}

/// One subject's pairs keyed by grid azimuth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub pairs: BTreeMap<u32, HrirPair>,
    pub source: Source,
}

impl SubjectRecord {
    pub fn pair(&self, azimuth: u32) -> Result<&HrirPair> {
        self.pairs.get(&azimuth).ok_or_else(|| {
            Error::dataset(&self.subject_id, format!("direction {azimuth}"), "missing")
        })
    }

    pub fn is_canonical(&self) -> bool {
        self.pairs.values().all(HrirPair::is_canonical)
    }

    /// Every pair run through [`dsp::preprocess`].
    pub fn preprocessed(&self, source_rate: u32) -> Result<Self> {
        let pairs = self
            .pairs
            .iter()
            .map(|(&az, p)| {
                let out = dsp::preprocess(p, source_rate).map_err(|e| {
                    Error::dataset(&self.subject_id, format!("direction {az}"), e.to_string())
                })?;
                Ok((az, out))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            subject_id: self.subject_id.clone(),
            pairs,
            source: self.source,
        })
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.sample_rate == 0 {
        return Err(Error::invalid(format!("{}: sample_rate must be positive", path.display())));
    }
    Ok(manifest)
}

/// Reads every subject as stored, without preprocessing. Structural problems
/// (duplicate ids, missing or extra directions) fail the whole manifest;
/// per-subject file problems are returned in place.
pub fn read_subjects(dir: &Path, manifest: &Manifest) -> Result<Vec<(String, Result<SubjectRecord>)>> {
    let mut seen = BTreeSet::new();
    for s in &manifest.subjects {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::dataset(&s.id, "id", "duplicate subject id"));
        }
        validate_directions(s)?;
    }
    let mut out: Vec<_> = manifest
        .subjects
        .iter()
        .map(|s| (s.id.clone(), read_subject(dir, manifest, s)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Loads a dataset directory into canonical records sorted by subject id.
/// Raw manifests are preprocessed from their declared rate; non-raw ones
/// must already hold 492 samples at 44.1 kHz.
pub fn load_dataset(dir: &Path) -> Result<Vec<SubjectRecord>> {
    let manifest = read_manifest(dir)?;
    read_subjects(dir, &manifest)?
        .into_iter()
        .map(|(_, rec)| {
            let rec = rec?;
            if manifest.raw {
                rec.preprocessed(manifest.sample_rate)
            } else {
                require_canonical(&rec)?;
                Ok(rec)
            }
        })
        .collect()
}

fn validate_directions(s: &ManifestSubject) -> Result<()> {
    let mut present = BTreeSet::new();
    for e in &s.directions {
        if !GRID_AZIMUTHS.contains(&e.azimuth_deg) {
            return Err(Error::dataset(
                &s.id,
                format!("direction {}", e.azimuth_deg),
                "azimuth is not on the 60 degree grid",
            ));
        }
        if !present.insert(e.azimuth_deg) {
            return Err(Error::dataset(&s.id, format!("direction {}", e.azimuth_deg), "listed twice"));
        }
    }
    if let Some(missing) = GRID_AZIMUTHS.iter().find(|az| !present.contains(az)) {
        return Err(Error::dataset(&s.id, format!("direction {missing}"), "missing"));
    }
    Ok(())
}

fn read_subject(dir: &Path, manifest: &Manifest, s: &ManifestSubject) -> Result<SubjectRecord> {
    let mut pairs = BTreeMap::new();
    for e in &s.directions {
        let field = |ear: &str| format!("direction {} {ear}", e.azimuth_deg);
        let ear = |name: &str, rel: &Path| -> Result<Hrir> {
            let samples = read_samples(&dir.join(rel), manifest.sample_rate)
                .map_err(|err| Error::dataset(&s.id, field(name), err.to_string()))?;
            Hrir::new(samples, manifest.sample_rate)
                .map_err(|err| Error::dataset(&s.id, field(name), err.to_string()))
        };
        let left = ear("left", &e.left)?;
        let right = ear("right", &e.right)?;
        let pair = HrirPair::new(left, right, Direction::azimuth(e.azimuth_deg as f64))
            .map_err(|err| Error::dataset(&s.id, format!("direction {}", e.azimuth_deg), err.to_string()))?;
        pairs.insert(e.azimuth_deg, pair);
    }
    Ok(SubjectRecord {
        subject_id: s.id.clone(),
        pairs,
        source: s.source.unwrap_or(manifest.source),
    })
}

fn require_canonical(rec: &SubjectRecord) -> Result<()> {
    for (az, p) in &rec.pairs {
        if !p.is_canonical() {
            return Err(Error::dataset(
                &rec.subject_id,
                format!("direction {az}"),
                format!(
                    "{} samples at {} Hz, expected {CANONICAL_LEN} at {CANONICAL_RATE} Hz (mark the manifest raw to preprocess)",
                    p.len(),
                    p.sample_rate()
                ),
            ));
        }
    }
    Ok(())
}

/// Samples of one sample file. WAV files must be mono at `expected_rate`.
pub fn read_samples(path: &Path, expected_rate: u32) -> Result<Vec<f64>> {
    if is_wav(path) {
        let mut reader = hound::WavReader::open(path)?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(Error::invalid(format!(
                "{}: expected mono, found {} channels",
                path.display(),
                spec.channels
            )));
        }
        if spec.sample_rate != expected_rate {
            return Err(Error::invalid(format!(
                "{}: sampled at {} Hz, manifest declares {expected_rate} Hz",
                path.display(),
                spec.sample_rate
            )));
        }
        let samples = match spec.sample_format {
            hound::SampleFormat::Float => reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<Vec<_>, _>>()?,
            hound::SampleFormat::Int => {
                let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
                reader
                    .samples::<i32>()
                    .map(|s| s.map(|v| v as f64 / scale))
                    .collect::<std::result::Result<Vec<_>, _>>()?
            }
        };
        Ok(samples)
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::invalid(format!(
                "{}: {} bytes is not a whole number of f32 samples",
                path.display(),
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    }
}

pub fn write_raw_f32(path: &Path, samples: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = samples.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Writes `records` as raw `f32` files plus a manifest. The manifest is
/// marked raw unless every record is canonical.
pub fn write_dataset(
    dir: &Path,
    records: &[SubjectRecord],
    source: Source,
    provenance: BTreeMap<String, serde_json::Value>,
) -> Result<Manifest> {
    let rate = records
        .first()
        .and_then(|r| r.pairs.values().next())
        .map_or(CANONICAL_RATE, HrirPair::sample_rate);
    let raw = !records.iter().all(SubjectRecord::is_canonical);
    let mut subjects = Vec::with_capacity(records.len());
    for rec in records {
        let id = &rec.subject_id;
        if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
            return Err(Error::dataset(id, "id", "not usable as a directory name"));
        }
        let sub = dir.join(id);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let mut directions = Vec::new();
        for (&az, pair) in &rec.pairs {
            if pair.sample_rate() != rate {
                return Err(Error::dataset(id, format!("direction {az}"), "sample rate differs from the dataset"));
            }
            let left = PathBuf::from(id).join(format!("az{az:03}_left.f32"));
            let right = PathBuf::from(id).join(format!("az{az:03}_right.f32"));
            write_raw_f32(&dir.join(&left), pair.left.samples())?;
            write_raw_f32(&dir.join(&right), pair.right.samples())?;
            directions.push(ManifestEntry {
                azimuth_deg: az,
                left,
                right,
            });
        }
        subjects.push(ManifestSubject {
            id: id.clone(),
            source: (rec.source != source).then_some(rec.source),
            directions,
        });
    }
    let manifest = Manifest {
        sample_rate: rate,
        raw,
        source,
        provenance,
        subjects,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
