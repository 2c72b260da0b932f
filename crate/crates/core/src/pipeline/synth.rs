//! Parametric stand-in for measured horizontal-plane HRIRs.
//!
//! Each subject gets a spherical head (Woodworth delay, single-pole head
//! shadow), a pinna notch and reflection, a shoulder reflection and a few
//! subject-specific spectral bumps. The result is rendered at 48 kHz with 512
//! samples, the same shape as a raw RIEC record.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use super::dataset::{Source, SubjectRecord};
use crate::dsp::{self, Direction, Hrir, HrirPair, GRID_AZIMUTHS};
use crate::error::Result;

pub const RAW_RATE: u32 = 48_000;
pub const RAW_LEN: usize = 512;
const SPEED_OF_SOUND: f64 = 343.0;
const RENDER_SIZE: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub id: String,
    pub head_radius_m: f64,
    pub onset_s: f64,
    pub level: f64,
    pub notch_hz: f64,
    pub notch_depth_db: f64,
    /// Relative notch shift between front and back sources.
    pub notch_tilt: f64,
    /// Relative shift of the spectral bumps across lateral angles.
    pub bump_tilt: f64,
    pub pinna_delay_s: f64,
    pub pinna_gain: f64,
    pub shoulder_delay_s: f64,
    pub shoulder_gain: f64,
    /// (center Hz, bandwidth Hz, gain dB) per ear.
    pub bumps: [Vec<(f64, f64, f64)>; 2],
}

impl SyntheticSubject {
    pub fn random(id: impl Into<String>, rng: &mut impl Rng) -> Self {
        let mut bumps = || {
            (0..3)
                .map(|_| {
                    (
                        rng.gen_range(1_500.0..12_000.0),
                        rng.gen_range(600.0..2_500.0),
                        rng.gen_range(-6.0..6.0),
                    )
                })
                .collect::<Vec<_>>()
        };
        let bumps = [bumps(), bumps()];
        Self {
            id: id.into(),
            head_radius_m: rng.gen_range(0.078..0.095),
            onset_s: rng.gen_range(0.9e-3..1.1e-3),
            level: rng.gen_range(0.8..1.25),
            notch_hz: rng.gen_range(6_500.0..10_000.0),
            notch_depth_db: rng.gen_range(8.0..18.0),
            notch_tilt: rng.gen_range(0.03..0.14),
            bump_tilt: rng.gen_range(-0.12..0.12),
            pinna_delay_s: rng.gen_range(60e-6..110e-6),
            pinna_gain: rng.gen_range(0.2..0.45),
            shoulder_delay_s: rng.gen_range(0.45e-3..0.75e-3),
            shoulder_gain: rng.gen_range(0.1..0.3),
            bumps,
        }
    }

    /// Raw 512-sample, 48 kHz pair for a source at `azimuth_deg`.
    pub fn render(&self, azimuth_deg: f64) -> Result<HrirPair> {
        let left = self.render_ear(azimuth_deg, 0)?;
        let right = self.render_ear(azimuth_deg, 1)?;
        HrirPair::new(left, right, Direction::azimuth(azimuth_deg))
    }

    /// `ear` 0 is left (axis at 270 degrees), 1 is right (axis at 90 degrees).
    fn render_ear(&self, azimuth_deg: f64, ear: usize) -> Result<Hrir> {
        let axis = if ear == 0 { 270.0 } else { 90.0 };
        let mut incidence = (azimuth_deg - axis).rem_euclid(360.0);
        if incidence > 180.0 {
            incidence = 360.0 - incidence;
        }
        let psi = incidence.to_radians();
        let a_over_c = self.head_radius_m / SPEED_OF_SOUND;
        let path = if psi < PI / 2.0 {
            1.0 - psi.cos()
        } else {
            1.0 + psi - PI / 2.0
        };
        let delay = self.onset_s + a_over_c * path;

        let front = azimuth_deg.to_radians().cos();
        let w0 = 1.0 / a_over_c;
        let alpha = 1.05 + 0.95 * (incidence / 150.0 * PI).cos();
        let lateral = azimuth_deg.to_radians().sin();
        let notch_hz = self.notch_hz * (1.0 + self.notch_tilt * front);
        let notch_depth = self.notch_depth_db * (0.7 + 0.3 * front.abs());
        let pinna_delay = self.pinna_delay_s * (1.25 - 0.25 * front);

        let fs = RAW_RATE as f64;
        let half = RENDER_SIZE / 2;
        let mut spec = vec![Complex64::default(); RENDER_SIZE];
        for (m, bin) in spec.iter_mut().enumerate().take(half + 1) {
            let f = m as f64 * fs / RENDER_SIZE as f64;
            let w = 2.0 * PI * f;
            let shadow = Complex64::new(1.0, alpha * w / (2.0 * w0)) / Complex64::new(1.0, w / (2.0 * w0));

            let mut gain_db = -notch_depth * (-((f - notch_hz) / 900.0).powi(2)).exp();
            if front < 0.0 {
                // the pinna flange shades sources from behind
                gain_db += 7.0 * front / (1.0 + (-(f - 4_000.0) / 800.0).exp());
            }
            for &(fc, bw, g) in &self.bumps[ear] {
                let fc = fc * (1.0 + self.bump_tilt * lateral);
                gain_db += g * (-((f - fc) / bw).powi(2)).exp();
            }
            let shaping = 10f64.powf(gain_db / 20.0);

            let echoes = Complex64::new(1.0, 0.0)
                + Complex64::from_polar(self.pinna_gain, -w * pinna_delay)
                + Complex64::from_polar(self.shoulder_gain, -w * self.shoulder_delay_s);
            *bin = shadow * echoes * shaping * Complex64::from_polar(self.level, -w * delay);
        }
        // Nyquist bin must be real for a real impulse response
        spec[half].im = 0.0;
        for m in 1..half {
            spec[RENDER_SIZE - m] = spec[m].conj();
        }
        dsp::spectrum::idft_in_place(&mut spec);

        let fade = 64;
        let samples = spec
            .iter()
            .take(RAW_LEN)
            .enumerate()
            .map(|(n, c)| {
                let taper = if n + fade >= RAW_LEN {
                    let k = (RAW_LEN - n) as f64 / fade as f64;
                    0.5 - 0.5 * (PI * k).cos()
                } else {
                    1.0
                };
                // 0.25 keeps peaks well inside float full scale
                0.25 * c.re / RENDER_SIZE as f64 * taper
            })
            .collect();
        Hrir::new(samples, RAW_RATE)
    }

    /// All six grid directions, raw.
    pub fn record(&self) -> Result<SubjectRecord> {
        let pairs = GRID_AZIMUTHS
            .iter()
            .map(|&az| Ok((az, self.render(az as f64)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(SubjectRecord {
            subject_id: self.id.clone(),
            pairs,
            source: Source::Other,
        })
    }
}

/// `n` subjects with ids `SYN000`, `SYN001`, ..., rendered raw at 48 kHz.
pub fn synthetic_subjects(n: usize, seed: u64) -> Vec<SyntheticSubject> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| SyntheticSubject::random(format!("SYN{i:03}"), &mut rng))
        .collect()
}

/// Preprocessed synthetic dataset: six canonical pairs per subject.
pub fn synthetic_dataset(n: usize, seed: u64) -> Result<Vec<SubjectRecord>> {
    synthetic_subjects(n, seed)
        .iter()
        .map(|s| s.record()?.preprocessed(RAW_RATE))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::CANONICAL_BAND;
    use crate::metrics;

    #[test]
    fn records_have_raw_shape_and_lateral_cues() {
        let s = &synthetic_subjects(1, 3)[0];
        let front = s.render(0.0).unwrap();
        assert_eq!(front.len(), RAW_LEN);
        assert_eq!(front.sample_rate(), RAW_RATE);
        let ild = |p: &HrirPair| (p.right.energy() / p.left.energy()).log10();
        let right = s.render(60.0).unwrap();
        assert!(ild(&right) > 0.5);
        assert!(ild(&front).abs() < 0.25 * ild(&right), "frontal source should be nearly symmetric");
        let onset = |h: &Hrir| {
            let peak = h.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            h.samples().iter().position(|v| v.abs() > 0.3 * peak).unwrap()
        };
        assert!(onset(&right.right) < onset(&right.left));
    }

    #[test]
    fn directions_differ_more_than_subjects_agree() {
        let data = synthetic_dataset(2, 5).unwrap();
        let sd = |a: &Hrir, b: &Hrir| {
            let fa = dsp::magnitude_spectrum(a, 512, CANONICAL_BAND).unwrap();
            let fb = dsp::magnitude_spectrum(b, 512, CANONICAL_BAND).unwrap();
            metrics::spectral_distortion(&fa, &fb).unwrap()
        };
        for rec in &data {
            assert!(rec.pairs.values().all(|p| p.is_canonical()));
            let base = &rec.pairs[&0].left;
            assert!(sd(base, &rec.pairs[&180].left) > 2.0);
            assert!(sd(base, &rec.pairs[&60].left) > 2.0);
        }
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(synthetic_subjects(3, 1), synthetic_subjects(3, 1));
        assert_ne!(synthetic_subjects(3, 1), synthetic_subjects(3, 2));
    }
}
