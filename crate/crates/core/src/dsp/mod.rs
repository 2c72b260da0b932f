//! Signal primitives for head-related impulse responses.
//!
//! Everything here is a pure function of its inputs. The canonical form of an
//! HRIR used throughout the crate is 492 samples at 44.1 kHz, band-limited to
//! 0.2 - 14 kHz; [`preprocess`] produces it from raw measurements.

mod filter;
mod resample;
pub(crate) mod spectrum;

pub use filter::{bandpass, Biquad};
pub use resample::{resample, RationalResampler};
pub use spectrum::{complex_spectrum, magnitude_spectrum};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical sampling rate after preprocessing.
pub const CANONICAL_RATE: u32 = 44_100;
/// Canonical HRIR length after preprocessing.
pub const CANONICAL_LEN: usize = 492;
/// Evaluation band for spectral distortion and the preprocessing band-pass.
pub const CANONICAL_BAND: Band = Band {
    lo_hz: 200.0,
    hi_hz: 14_000.0,
};
/// Transform size used for spectral distortion: smallest power of two >= 492.
pub const SD_TRANSFORM_SIZE: usize = 512;

/// The six horizontal-plane azimuths present in every dataset record.
pub const GRID_AZIMUTHS: [u32; 6] = [0, 60, 120, 180, 240, 300];
/// Directions a network is trained to generate (every grid azimuth but the input).
pub const TARGET_AZIMUTHS: [u32; 5] = [60, 120, 180, 240, 300];

/// Time-domain impulse response of one ear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hrir {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Hrir {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("HRIR must have at least one sample"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn is_canonical(&self) -> bool {
        self.len() == CANONICAL_LEN && self.sample_rate == CANONICAL_RATE
    }

    /// Returns a copy with every sample mapped through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|&v| f(v)).collect(), self.sample_rate)
    }
}

/// Horizontal-plane direction. 0 degrees is the front and azimuth grows
/// clockwise, so 60 degrees lies on the listener's right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Direction {
    /// Horizontal direction with the azimuth wrapped into [0, 360).
    pub fn azimuth(deg: f64) -> Self {
        Self {
            azimuth_deg: wrap_degrees(deg),
            elevation_deg: 0.0,
        }
    }

    /// The dataset grid azimuth this direction sits on, if any.
    pub fn grid_azimuth(&self) -> Option<u32> {
        GRID_AZIMUTHS
            .iter()
            .copied()
            .find(|&a| (a as f64 - self.azimuth_deg).abs() < 1e-9)
    }
}

pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Left/right HRIRs measured for one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrirPair {
    pub left: Hrir,
    pub right: Hrir,
    pub direction: Direction,
}

impl HrirPair {
    pub fn new(left: Hrir, right: Hrir, direction: Direction) -> Result<Self> {
        if left.sample_rate() != right.sample_rate() {
            return Err(Error::invalid(format!(
                "ear sample rates differ ({} vs {})",
                left.sample_rate(),
                right.sample_rate()
            )));
        }
        if left.len() != right.len() {
            return Err(Error::invalid(format!(
                "ear lengths differ ({} vs {})",
                left.len(),
                right.len()
            )));
        }
        Ok(Self {
            left,
            right,
            direction,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.left.sample_rate()
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn is_canonical(&self) -> bool {
        self.left.is_canonical() && self.right.is_canonical()
    }

    pub fn ears(&self) -> [&Hrir; 2] {
        [&self.left, &self.right]
    }

    /// Applies `f` to both ears and keeps the direction.
    pub fn try_map(&self, f: impl Fn(&Hrir) -> Result<Hrir>) -> Result<Self> {
        Self::new(f(&self.left)?, f(&self.right)?, self.direction)
    }
}

/// Inclusive frequency band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Self {
        Self { lo_hz, hi_hz }
    }

    pub fn contains(&self, f_hz: f64) -> bool {
        self.lo_hz <= f_hz && f_hz <= self.hi_hz
    }
}

/// Magnitude spectrum on a uniform bin grid together with the evaluation band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    pub bin_freqs_hz: Vec<f64>,
    pub band: Band,
}

impl Spectrum {
    /// Indices of the bins inside the band (both endpoints included).
    pub fn band_bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.bin_freqs_hz
            .iter()
            .enumerate()
            .filter(|(_, &f)| self.band.contains(f))
            .map(|(i, _)| i)
    }

    pub fn band_len(&self) -> usize {
        self.band_bins().count()
    }
}

/// Truncates or zero-pads the tail so the result has exactly `n` samples.
pub fn fit_length(h: &Hrir, n: usize) -> Result<Hrir> {
    if n == 0 {
        return Err(Error::invalid("target length must be at least 1"));
    }
    let mut samples = h.samples()[..h.len().min(n)].to_vec();
    samples.resize(n, 0.0);
    Hrir::new(samples, h.sample_rate())
}

/// Resample to 44.1 kHz, fit to 492 samples, then band-pass 0.2 - 14 kHz,
/// identically for both ears.
pub fn preprocess(raw: &HrirPair, source_rate: u32) -> Result<HrirPair> {
    if raw.sample_rate() != source_rate {
        return Err(Error::invalid(format!(
            "pair is sampled at {} Hz but source rate {} Hz was declared",
            raw.sample_rate(),
            source_rate
        )));
    }
    raw.try_map(|h| {
        let h = resample(h, CANONICAL_RATE)?;
        let h = fit_length(&h, CANONICAL_LEN)?;
        bandpass(&h, CANONICAL_BAND.lo_hz, CANONICAL_BAND.hi_hz)
    })
}
