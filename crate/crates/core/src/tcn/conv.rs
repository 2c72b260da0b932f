use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multichannel sequence stored channel-major: `data[c * len + t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    channels: usize,
    len: usize,
    data: Vec<f64>,
}

impl Sequence {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Self {
            channels,
            len,
            data: vec![0.0; channels * len],
        }
    }

    pub fn from_vec(channels: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * len {
            return Err(Error::invalid(format!(
                "sequence data has {} values, expected {channels} x {len}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            len,
            data,
        })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let len = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::invalid("sequence rows have different lengths"));
        }
        Ok(Self {
            channels: rows.len(),
            len,
            data: rows.concat(),
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn row_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            channels: self.channels,
            len: self.len,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Sequence) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Weights of one causal convolution: `weight[(co * c_in + ci) * kernel + j]`.
///
/// Tap `j` reads the input `(kernel - 1 - j) * dilation` samples in the past,
/// so the last tap is the current sample.
#[derive(Debug, Clone, Copy)]
pub struct ConvWeights<'a> {
    pub weight: &'a [f64],
    pub bias: &'a [f64],
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
}

impl ConvWeights<'_> {
    fn check(&self, x: &Sequence, dilation: usize) -> Result<()> {
        if dilation == 0 {
            return Err(Error::invalid("dilation must be >= 1"));
        }
        if x.is_empty() {
            return Err(Error::invalid("input sequence is empty"));
        }
        if x.channels() != self.in_channels {
            return Err(Error::invalid(format!(
                "input has {} channels, convolution expects {}",
                x.channels(),
                self.in_channels
            )));
        }
        if self.weight.len() != self.out_channels * self.in_channels * self.kernel
            || self.bias.len() != self.out_channels
        {
            return Err(Error::invalid("weight or bias shape does not match the convolution"));
        }
        Ok(())
    }

    #[inline]
    fn w(&self, co: usize, ci: usize, j: usize) -> f64 {
        self.weight[(co * self.in_channels + ci) * self.kernel + j]
    }
}

/// `y[c, t] = b[c] + sum_ci sum_j w[c, ci, j] * x[ci, t - (k-1-j) * dilation]`
/// with zeros before `t = 0`.
pub fn dilated_causal_conv(x: &Sequence, conv: ConvWeights<'_>, dilation: usize) -> Result<Sequence> {
    conv.check(x, dilation)?;
    let n = x.len();
    let mut y = Sequence::zeros(conv.out_channels, n);
    for co in 0..conv.out_channels {
        let out = y.row_mut(co);
        out.fill(conv.bias[co]);
        for ci in 0..conv.in_channels {
            let input = x.row(ci);
            for j in 0..conv.kernel {
                let w = conv.w(co, ci, j);
                let lag = (conv.kernel - 1 - j) * dilation;
                if w == 0.0 || lag >= n {
                    continue;
                }
                for (o, &v) in out[lag..].iter_mut().zip(&input[..n - lag]) {
                    *o += w * v;
                }
            }
        }
    }
    Ok(y)
}

/// Gradients of a causal convolution given the upstream gradient `grad_y`.
pub(crate) struct ConvGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: Sequence,
}

pub(crate) fn dilated_causal_conv_backward(
    x: &Sequence,
    conv: ConvWeights<'_>,
    dilation: usize,
    grad_y: &Sequence,
) -> ConvGrads {
    let n = x.len();
    let mut weight = vec![0.0; conv.weight.len()];
    let mut bias = vec![0.0; conv.out_channels];
    let mut input = Sequence::zeros(conv.in_channels, n);

    for co in 0..conv.out_channels {
        let g = grad_y.row(co);
        bias[co] = g.iter().sum();
        for ci in 0..conv.in_channels {
            let xr = x.row(ci);
            for j in 0..conv.kernel {
                let lag = (conv.kernel - 1 - j) * dilation;
                if lag >= n {
                    continue;
                }
                let idx = (co * conv.in_channels + ci) * conv.kernel + j;
                weight[idx] = g[lag..].iter().zip(&xr[..n - lag]).map(|(a, b)| a * b).sum();
                let w = conv.weight[idx];
                if w != 0.0 {
                    let gi = input.row_mut(ci);
                    for (d, &v) in gi[..n - lag].iter_mut().zip(&g[lag..]) {
                        *d += w * v;
                    }
                }
            }
        }
    }
    ConvGrads {
        weight,
        bias,
        input,
    }
}
