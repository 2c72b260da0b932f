use super::Hrir;
use crate::error::{Error, Result};

const TAPS_PER_PHASE: usize = 64;
const KAISER_BETA: f64 = 8.0;
/// Anti-alias cutoff as a fraction of the lower of the two rates.
const CUTOFF_FRACTION: f64 = 0.45;
const MAX_RATIO_TERM: u64 = 1000;

/// Polyphase rational resampler with a Kaiser-windowed sinc kernel.
///
/// Output sample `k` sits at input time `k * down / up`; every such time falls
/// exactly on one of the `up` kernel phases, so the whole kernel is tabulated
/// once. Each phase is normalized to unit DC gain.
#[derive(Debug, Clone)]
pub struct RationalResampler {
    up: usize,
    down: usize,
    from_rate: u32,
    to_rate: u32,
    /// `up` rows of `TAPS_PER_PHASE` coefficients.
    phases: Vec<f64>,
}

impl RationalResampler {
    pub fn new(from_rate: u32, to_rate: u32) -> Result<Self> {
        if from_rate == 0 || to_rate == 0 {
            return Err(Error::invalid("sample rates must be positive"));
        }
        let g = gcd(from_rate as u64, to_rate as u64);
        let up = to_rate as u64 / g;
        let down = from_rate as u64 / g;
        if up > MAX_RATIO_TERM || down > MAX_RATIO_TERM {
            return Err(Error::invalid(format!(
                "ratio {to_rate}/{from_rate} reduces to {up}/{down}, terms must be <= {MAX_RATIO_TERM}"
            )));
        }
        let (up, down) = (up as usize, down as usize);

        let cutoff_hz = CUTOFF_FRACTION * from_rate.min(to_rate) as f64;
        // cycles per input sample
        let fc = cutoff_hz / from_rate as f64;
        let half = (TAPS_PER_PHASE / 2) as f64;
        let i0_beta = bessel_i0(KAISER_BETA);

        let mut phases = vec![0.0; up * TAPS_PER_PHASE];
        for (r, row) in phases.chunks_exact_mut(TAPS_PER_PHASE).enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                let tau = j as f64 - (half - 1.0) - r as f64 / up as f64;
                let x = tau / half;
                let w = if x.abs() >= 1.0 {
                    0.0
                } else {
                    bessel_i0(KAISER_BETA * (1.0 - x * x).sqrt()) / i0_beta
                };
                *c = 2.0 * fc * sinc(2.0 * fc * tau) * w;
            }
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|c| *c /= sum);
        }

        Ok(Self {
            up,
            down,
            from_rate,
            to_rate,
            phases,
        })
    }

    /// Reduced ratio `(up, down)`.
    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        let n_out = self.output_len(input.len());
        let offset = TAPS_PER_PHASE / 2 - 1;
        (0..n_out)
            .map(|k| {
                let t = k * self.down;
                let base = t / self.up;
                let row = &self.phases[(t % self.up) * TAPS_PER_PHASE..][..TAPS_PER_PHASE];
                row.iter()
                    .enumerate()
                    .filter_map(|(j, &c)| {
                        let n = (base + j).checked_sub(offset)?;
                        input.get(n).map(|&x| c * x)
                    })
                    .sum()
            })
            .collect()
    }

    pub fn apply(&self, h: &Hrir) -> Result<Hrir> {
        if h.sample_rate() != self.from_rate {
            return Err(Error::invalid(format!(
                "resampler expects {} Hz input, got {} Hz",
                self.from_rate,
                h.sample_rate()
            )));
        }
        Hrir::new(self.process(h.samples()), self.to_rate)
    }
}

/// Resamples `h` to `to_rate`. Equal rates return a copy.
pub fn resample(h: &Hrir, to_rate: u32) -> Result<Hrir> {
    if to_rate == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    if h.sample_rate() == to_rate {
        return Ok(h.clone());
    }
    RationalResampler::new(h.sample_rate(), to_rate)?.apply(h)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}
