//! Spectral distortion, signal-to-deviation ratio, the combined training cost
//! and its gradient with respect to the generated HRIR.
//!
//! The cost of a generated HRIR `g` against a measured one `h` is
//!
//! ```text
//! e = SD(|H|, |G|) + 10 log10( sum (h - g)^2 / sum h^2 )
//! ```
//!
//! so the second term is the negated SDR. Magnitudes are floored at
//! [`MAGNITUDE_FLOOR`], and a deviation energy below `MAGNITUDE_FLOOR * sum h^2`
//! saturates the time-domain term at -[`DB_CLAMP`] (SDR at +[`DB_CLAMP`]).

use std::f64::consts::LN_10;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Band, Hrir, Spectrum};
use crate::error::{Error, Result};

pub const MAGNITUDE_FLOOR: f64 = 1e-12;
pub const DB_CLAMP: f64 = 120.0;

const DB20: f64 = 20.0 / LN_10;
const DB10: f64 = 10.0 / LN_10;

/// Value of the combined cost split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostValue {
    pub total: f64,
    pub sd_term: f64,
    /// `10 log10(deviation / signal)`, i.e. `-SDR`.
    pub deviation_term: f64,
}

impl CostValue {
    fn new(sd_term: f64, deviation_term: f64) -> Self {
        Self {
            total: sd_term + deviation_term,
            sd_term,
            deviation_term,
        }
    }

    pub fn sdr(&self) -> f64 {
        -self.deviation_term
    }
}

/// Gradient of the cost split per term; [`CostGradient::total`] sums them.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub sd: Vec<f64>,
    pub deviation: Vec<f64>,
}

impl CostGradient {
    pub fn total(&self) -> Vec<f64> {
        self.sd
            .iter()
            .zip(&self.deviation)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// RMS over the band bins of the dB ratio between `reference` and `generated`.
pub fn spectral_distortion(reference: &Spectrum, generated: &Spectrum) -> Result<f64> {
    if reference.bin_freqs_hz != generated.bin_freqs_hz || reference.band != generated.band {
        return Err(Error::invalid("spectra are on different bin grids or bands"));
    }
    let bins: Vec<usize> = reference.band_bins().collect();
    if bins.is_empty() {
        return Err(Error::invalid("evaluation band contains no bins"));
    }
    let mean_sq = bins
        .iter()
        .map(|&m| {
            let d = log_ratio_db(reference.magnitudes[m], generated.magnitudes[m]);
            d * d
        })
        .sum::<f64>()
        / bins.len() as f64;
    Ok(mean_sq.sqrt())
}

fn log_ratio_db(reference: f64, generated: f64) -> f64 {
    DB20 * (reference.max(MAGNITUDE_FLOOR).ln() - generated.max(MAGNITUDE_FLOOR).ln())
}

/// Signal-to-deviation ratio in dB, clamped at +120 dB for a near-perfect match.
pub fn sdr(h: &Hrir, hhat: &Hrir) -> Result<f64> {
    Ok(-deviation_term(h.samples(), hhat.samples())?.0)
}

/// Returns the time-domain cost term and the two energies behind it.
fn deviation_term(h: &[f64], hhat: &[f64]) -> Result<(f64, f64, f64)> {
    if h.len() != hhat.len() {
        return Err(Error::invalid(format!(
            "length mismatch: reference {} vs generated {}",
            h.len(),
            hhat.len()
        )));
    }
    let signal: f64 = h.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::invalid("reference HRIR is all zero"));
    }
    let deviation: f64 = h.iter().zip(hhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let term = if deviation < MAGNITUDE_FLOOR * signal {
        -DB_CLAMP
    } else {
        10.0 * (deviation / signal).log10()
    };
    Ok((term, signal, deviation))
}

/// The combined cost between a measured HRIR `h` and a generated `hhat`.
pub fn cost(h: &Hrir, hhat: &Hrir, transform_size: usize, band: Band) -> Result<CostValue> {
    check_pair(h, hhat)?;
    let (dev, _, _) = deviation_term(h.samples(), hhat.samples())?;
    let reference = dsp::magnitude_spectrum(h, transform_size, band)?;
    let generated = dsp::magnitude_spectrum(hhat, transform_size, band)?;
    Ok(CostValue::new(
        spectral_distortion(&reference, &generated)?,
        dev,
    ))
}

/// Gradient of [`cost`] with respect to every sample of `hhat`.
pub fn cost_gradient(
    h: &Hrir,
    hhat: &Hrir,
    transform_size: usize,
    band: Band,
) -> Result<CostGradient> {
    Ok(cost_and_gradient(h, hhat, transform_size, band)?.1)
}

/// Cost and gradient in one pass (the training loop's entry point).
pub fn cost_and_gradient(
    h: &Hrir,
    hhat: &Hrir,
    transform_size: usize,
    band: Band,
) -> Result<(CostValue, CostGradient)> {
    check_pair(h, hhat)?;
    let reference = dsp::magnitude_spectrum(h, transform_size, band)?;
    let ctx = SdContext::new(&reference, transform_size);
    ctx.evaluate(h.samples(), hhat.samples())
}

fn check_pair(h: &Hrir, hhat: &Hrir) -> Result<()> {
    if h.sample_rate() != hhat.sample_rate() {
        return Err(Error::invalid("sample rates differ"));
    }
    if h.len() != hhat.len() {
        return Err(Error::invalid(format!(
            "length mismatch: reference {} vs generated {}",
            h.len(),
            hhat.len()
        )));
    }
    Ok(())
}

/// Reference-side quantities that stay fixed while the generated HRIR changes.
pub(crate) struct SdContext {
    transform_size: usize,
    bins: Vec<usize>,
    /// reference magnitudes at `bins`, floored when used
    reference_mags: Vec<f64>,
}

impl SdContext {
    pub(crate) fn new(reference: &Spectrum, transform_size: usize) -> Self {
        let bins: Vec<usize> = reference.band_bins().collect();
        let reference_mags = bins.iter().map(|&m| reference.magnitudes[m]).collect();
        Self {
            transform_size,
            bins,
            reference_mags,
        }
    }

    pub(crate) fn evaluate(&self, h: &[f64], hhat: &[f64]) -> Result<(CostValue, CostGradient)> {
        let (dev, _, deviation_energy) = deviation_term(h, hhat)?;
        let n = hhat.len();

        let deviation_grad = if dev <= -DB_CLAMP {
            vec![0.0; n]
        } else {
            let scale = -2.0 * DB10 / deviation_energy;
            h.iter().zip(hhat).map(|(a, b)| scale * (a - b)).collect()
        };

        let spectrum = dsp::spectrum::dft(hhat, self.transform_size);
        let m_count = self.bins.len() as f64;
        let ratios: Vec<f64> = self
            .bins
            .iter()
            .zip(&self.reference_mags)
            .map(|(&m, &r)| log_ratio_db(r, spectrum[m].norm()))
            .collect();
        let sd = (ratios.iter().map(|d| d * d).sum::<f64>() / m_count).sqrt();

        // dSD/dg[n] = sum_m c_m Re(G_m exp(+i 2 pi m n / N)),
        // c_m = -(20/ln10) d_m / (M SD |G_m|^2); bins on the floor contribute 0.
        let mut buf = vec![Complex64::default(); self.transform_size];
        if sd > 0.0 {
            for (&m, &d) in self.bins.iter().zip(&ratios) {
                let g = spectrum[m];
                let power = g.norm_sqr();
                if g.norm() > MAGNITUDE_FLOOR {
                    buf[m] = g * (-DB20 * d / (m_count * sd * power));
                }
            }
            dsp::spectrum::idft_in_place(&mut buf);
        }
        let sd_grad = buf[..n].iter().map(|c| c.re).collect();

        Ok((
            CostValue::new(sd, dev),
            CostGradient {
                sd: sd_grad,
                deviation: deviation_grad,
            },
        ))
    }
}
