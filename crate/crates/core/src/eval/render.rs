use std::io::Cursor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::{dft, idft_in_place};
use crate::dsp::{Direction, HrirPair, CANONICAL_RATE};
use crate::error::{Error, Result};

/// Joint peak level of rendered stimuli, as a fraction of full scale.
pub const PEAK_LEVEL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HrtfType {
    Measured,
    Generated,
}

impl HrtfType {
    pub const BOTH: [HrtfType; 2] = [HrtfType::Measured, HrtfType::Generated];

    pub fn as_str(self) -> &'static str {
        match self {
            HrtfType::Measured => "measured",
            HrtfType::Generated => "generated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub stimulus_id: String,
    pub direction: Direction,
    pub hrtf_type: HrtfType,
    pub sample_rate: u32,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Full linear convolution through the FFT. Output length is
/// `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let fa = dft(a, n);
    let fb = dft(b, n);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    idft_in_place(&mut prod);
    prod.iter().take(out_len).map(|c| c.re / n as f64).collect()
}

/// Convolves a mono source with both ears of `pair` and scales both
/// channels by one factor so the louder peak sits at [`PEAK_LEVEL`]. A
/// silent source yields silence.
pub fn render_binaural(source: &[f64], pair: &HrirPair) -> Result<(Vec<f64>, Vec<f64>)> {
    if source.is_empty() {
        return Err(Error::invalid("source is empty"));
    }
    if source.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("source contains non-finite samples"));
    }
    let mut left = convolve(source, pair.left.samples());
    let mut right = convolve(source, pair.right.samples());
    let peak = left.iter().chain(&right).fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = PEAK_LEVEL / peak;
        left.iter_mut().chain(right.iter_mut()).for_each(|v| *v *= g);
    } else {
        left.fill(0.0);
        right.fill(0.0);
    }
    Ok((left, right))
}

pub fn render_stimulus(
    stimulus_id: impl Into<String>,
    source: &[f64],
    pair: &HrirPair,
    hrtf_type: HrtfType,
) -> Result<Stimulus> {
    let (left, right) = render_binaural(source, pair)?;
    Ok(Stimulus {
        stimulus_id: stimulus_id.into(),
        direction: pair.direction,
        hrtf_type,
        sample_rate: pair.sample_rate(),
        left,
        right,
    })
}

/// Seeded white noise restricted to `lo_hz..=hi_hz` by zeroing the other DFT
/// bins, scaled to unit peak.
pub fn band_limited_noise(len: usize, sample_rate: u32, lo_hz: f64, hi_hz: f64, seed: u64) -> Result<Vec<f64>> {
    if len == 0 || !(0.0 <= lo_hz && lo_hz < hi_hz && hi_hz <= sample_rate as f64 / 2.0) {
        return Err(Error::invalid(format!(
            "noise band {lo_hz}-{hi_hz} Hz at {sample_rate} Hz with {len} samples is not realizable"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut bins = dft(&white, len);
    let df = sample_rate as f64 / len as f64;
    for (m, b) in bins.iter_mut().enumerate() {
        let k = m.min(len - m);
        let f = k as f64 * df;
        if f < lo_hz || f > hi_hz {
            *b = Complex64::default();
        }
    }
    idft_in_place(&mut bins);
    let mut out: Vec<f64> = bins.iter().map(|c| c.re / len as f64).collect();
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(out)
}

/// The default test signal: one second of 100 Hz - 15 kHz noise.
pub fn default_source(seed: u64) -> Vec<f64> {
    band_limited_noise(CANONICAL_RATE as usize, CANONICAL_RATE, 100.0, 15_000.0, seed)
        .expect("constant parameters are valid")
}

/// 16-bit stereo RIFF/WAVE bytes, clipped to full scale.
pub fn wav_bytes(left: &[f64], right: &[f64], sample_rate: u32) -> Result<Vec<u8>> {
    if left.len() != right.len() {
        return Err(Error::invalid("channels differ in length"));
    }
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec)?;
        let q = |v: f64| (v.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
        for (&l, &r) in left.iter().zip(right) {
            w.write_sample(q(l))?;
            w.write_sample(q(r))?;
        }
        w.finalize()?;
    }
    Ok(cursor.into_inner())
}

impl Stimulus {
    pub fn wav(&self) -> Result<Vec<u8>> {
        wav_bytes(&self.left, &self.right, self.sample_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Hrir;

    fn naive(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    fn random_pair(rng: &mut impl Rng, zero_right: bool) -> HrirPair {
        let mut ear = |zero: bool| {
            let s = (0..492).map(|_| if zero { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
            Hrir::new(s, 44100).unwrap()
        };
        let (l, r) = (ear(false), ear(zero_right));
        HrirPair::new(l, r, Direction::azimuth(60.0)).unwrap()
    }

    #[test]
    fn impulse_reproduces_hrirs_up_to_one_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pair = random_pair(&mut rng, false);
        let mut src = vec![0.0; 8];
        src[0] = 1.0;
        let (l, r) = render_binaural(&src, &pair).unwrap();
        assert_eq!(l.len(), 8 + 492 - 1);
        let g = l[0] / pair.left.samples()[0];
        for (a, b) in l.iter().zip(pair.left.samples()).chain(r.iter().zip(pair.right.samples())) {
            assert!((a - g * b).abs() < 1e-12);
        }
        let peak = l.iter().chain(&r).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - PEAK_LEVEL).abs() < 1e-12);
    }

    #[test]
    fn silent_ear_and_silent_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pair = random_pair(&mut rng, true);
        let src: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, r) = render_binaural(&src, &pair).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        let (l, r) = render_binaural(&[0.0; 50], &pair).unwrap();
        assert!(l.iter().chain(&r).all(|&v| v == 0.0));
        assert!(render_binaural(&[], &pair).is_err());
    }

    #[test]
    fn fft_convolution_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..492).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = convolve(&a, &b);
        let slow = naive(&a, &b);
        assert_eq!(fast.len(), slow.len());
        let err = fast.iter().zip(&slow).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-9, "max error {err}");
    }

    #[test]
    fn rendering_preserves_level_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pair = random_pair(&mut rng, false);
        let quiet = HrirPair::new(pair.left.clone(), pair.right.map(|v| v * 0.1).unwrap(), pair.direction).unwrap();
        let src: Vec<f64> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (l, r) = render_binaural(&src, &quiet).unwrap();
        let raw_l = naive(&src, quiet.left.samples());
        let raw_r = naive(&src, quiet.right.samples());
        let g = l[10] / raw_l[10];
        for (a, b) in r.iter().zip(&raw_r) {
            assert!((a - g * b).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_is_band_limited_and_seeded() {
        let x = band_limited_noise(4410, 44100, 100.0, 15_000.0, 9).unwrap();
        assert_eq!(x, band_limited_noise(4410, 44100, 100.0, 15_000.0, 9).unwrap());
        let spec = dft(&x, 4410);
        let df = 10.0;
        for (m, c) in spec.iter().enumerate().take(2206) {
            let f = m as f64 * df;
            if !(100.0..=15_000.0).contains(&f) {
                assert!(c.norm() < 1e-9, "leak at {f} Hz");
            }
        }
        assert_eq!(x.iter().fold(0.0f64, |m, v| m.max(v.abs())), 1.0);
        assert_eq!(default_source(1).len(), 44100);
    }

    #[test]
    fn wav_is_16_bit_stereo() {
        let bytes = wav_bytes(&[0.0, 0.5, -1.0], &[1.0, 2.0, 0.25], 44100).unwrap();
        let mut r = hound::WavReader::new(Cursor::new(bytes)).unwrap();
        let spec = r.spec();
        assert_eq!((spec.channels, spec.bits_per_sample, spec.sample_rate), (2, 16, 44100));
        let s: Vec<i16> = r.samples::<i16>().map(|v| v.unwrap()).collect();
        assert_eq!(s, vec![0, 32767, 16384, 32767, -32767, 8192]);
    }
}
