use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{Band, Hrir, Spectrum};
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward DFT of `x` zero-padded to `n` points (all `n` bins).
pub(crate) fn dft(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::default());
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    buf
}

/// Unnormalized inverse DFT, in place.
pub(crate) fn idft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n).process(buf));
}

/// Complex bins `0..=transform_size/2` of the zero-padded transform.
pub fn complex_spectrum(h: &Hrir, transform_size: usize) -> Result<Vec<Complex64>> {
    if transform_size < h.len() {
        return Err(Error::invalid(format!(
            "transform size {transform_size} is shorter than the signal ({})",
            h.len()
        )));
    }
    let mut bins = dft(h.samples(), transform_size);
    bins.truncate(transform_size / 2 + 1);
    Ok(bins)
}

/// Magnitudes of bins `0..=transform_size/2`, with `f_m = m * fs / transform_size`.
pub fn magnitude_spectrum(h: &Hrir, transform_size: usize, band: Band) -> Result<Spectrum> {
    let fs = h.sample_rate() as f64;
    if !(band.lo_hz > 0.0 && band.lo_hz <= band.hi_hz && band.hi_hz <= fs / 2.0) {
        return Err(Error::invalid(format!(
            "band {}-{} Hz must lie within (0, {}] Hz",
            band.lo_hz,
            band.hi_hz,
            fs / 2.0
        )));
    }
    let bins = complex_spectrum(h, transform_size)?;
    let spectrum = Spectrum {
        magnitudes: bins.iter().map(|c| c.norm()).collect(),
        bin_freqs_hz: (0..bins.len())
            .map(|m| m as f64 * fs / transform_size as f64)
            .collect(),
        band,
    };
    if spectrum.band_len() == 0 {
        return Err(Error::invalid(format!(
            "band {}-{} Hz contains no bins at transform size {transform_size}",
            band.lo_hz, band.hi_hz
        )));
    }
    Ok(spectrum)
}
