use std::f64::consts::{PI, SQRT_2};

use super::Hrir;
use crate::error::{Error, Result};

/// Second-order IIR section, direct form II transposed, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Butterworth low-pass via the bilinear transform with pre-warping.
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff_hz / sample_rate).tan();
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm],
        }
    }

    pub fn butterworth_highpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        let k = (PI * cutoff_hz / sample_rate).tan();
        let norm = 1.0 / (1.0 + SQRT_2 * k + k * k);
        Self {
            b: [norm, -2.0 * norm, norm],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - SQRT_2 * k + k * k) * norm],
        }
    }

    pub fn run(&self, x: &mut [f64]) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + s1;
            s1 = self.b[1] * input - self.a[0] * out + s2;
            s2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }

    /// Magnitude of the frequency response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = -(self.b[1] * s1 + self.b[2] * s2);
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = -(self.a[0] * s1 + self.a[1] * s2);
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }
}

/// Samples of odd reflection added at each end before forward-backward filtering.
const EDGE_PAD: usize = 27;

/// Zero-phase band-pass: a 2nd-order Butterworth high-pass at `lo_hz` cascaded
/// with a 2nd-order Butterworth low-pass at `hi_hz` (order 4 overall), run
/// forward and then backward. The signal is extended by odd reflection at both
/// ends to tame edge transients.
pub fn bandpass(h: &Hrir, lo_hz: f64, hi_hz: f64) -> Result<Hrir> {
    let fs = h.sample_rate() as f64;
    let nyquist = fs / 2.0;
    if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < nyquist) {
        return Err(Error::invalid(format!(
            "band {lo_hz}-{hi_hz} Hz must satisfy 0 < lo < hi < {nyquist} Hz"
        )));
    }
    let sections = [
        Biquad::butterworth_highpass(lo_hz, fs),
        Biquad::butterworth_lowpass(hi_hz, fs),
    ];

    let x = h.samples();
    let n = x.len();
    let pad = EDGE_PAD.min(n - 1);
    let mut buf = Vec::with_capacity(n + 2 * pad);
    buf.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    buf.extend_from_slice(x);
    buf.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    for s in &sections {
        s.run(&mut buf);
    }
    buf.reverse();
    for s in &sections {
        s.run(&mut buf);
    }
    buf.reverse();

    Hrir::new(buf[pad..pad + n].to_vec(), h.sample_rate())
}
