use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
    Identity,
}

/// What one dropout draw covers. `Channel` zeroes whole channels for the
/// entire sequence, so a train-mode output stays a filtered version of the
/// input instead of picking up sample-wise noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropoutKind {
    #[default]
    Channel,
    Element,
}

impl DropoutKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DropoutKind::Channel => "channel",
            DropoutKind::Element => "element",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "channel" => Some(DropoutKind::Channel),
            "element" => Some(DropoutKind::Element),
            _ => None,
        }
    }
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Silu => x / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 + x * (1.0 - s))
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Silu => "silu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "silu" => Some(Activation::Silu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Allowed hyperparameter ranges of the architecture.
pub mod ranges {
    pub const KERNEL_SIZE: usize = 2;
    pub const CHANNELS: (usize, usize) = (10, 150);
    pub const LAYERS: (usize, usize) = (2, 8);
    pub const WEIGHT_DECAY: (f64, f64) = (1e-6, 1e-4);
    pub const DROPOUT: f64 = 0.2;
    pub const EPOCHS: usize = 10_000;
}

/// Architecture and optimization settings for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TcnConfig {
    pub kernel_size: usize,
    pub channels: usize,
    pub layers: usize,
    pub dropout: f64,
    pub dropout_kind: DropoutKind,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub hidden_activation: Activation,
    pub seed: u64,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self {
            kernel_size: ranges::KERNEL_SIZE,
            channels: 32,
            layers: 8,
            dropout: ranges::DROPOUT,
            dropout_kind: DropoutKind::Channel,
            weight_decay: 1e-5,
            learning_rate: 1e-3,
            epochs: ranges::EPOCHS,
            in_channels: 2,
            out_channels: 2,
            hidden_activation: Activation::Silu,
            seed: 0,
        }
    }
}

impl TcnConfig {
    /// Checks that a network can be built from this config at all.
    pub fn validate_structure(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if self.kernel_size == 0 {
            return fail("kernel_size must be >= 1".into());
        }
        if self.channels == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return fail("channel counts must be >= 1".into());
        }
        if self.layers == 0 || self.layers > 30 {
            return fail(format!("layers must be in 1..=30, got {}", self.layers));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        Ok(())
    }

    /// Checks the architecture ranges the search space is drawn from.
    pub fn validate_ranges(&self) -> Result<()> {
        self.validate_structure()?;
        let fail = |m: String| Err(Error::invalid(m));
        if self.kernel_size != ranges::KERNEL_SIZE {
            return fail(format!("kernel_size must be 2, got {}", self.kernel_size));
        }
        let (lo, hi) = ranges::CHANNELS;
        if !(lo..=hi).contains(&self.channels) {
            return fail(format!("channels must be in {lo}..={hi}, got {}", self.channels));
        }
        let (lo, hi) = ranges::LAYERS;
        if !(lo..=hi).contains(&self.layers) {
            return fail(format!("layers must be in {lo}..={hi}, got {}", self.layers));
        }
        let (lo, hi) = ranges::WEIGHT_DECAY;
        if !(lo..=hi).contains(&self.weight_decay) {
            return fail(format!(
                "weight_decay must be in [{lo:e}, {hi:e}], got {:e}",
                self.weight_decay
            ));
        }
        if self.in_channels != 2 || self.out_channels != 2 {
            return fail("in_channels and out_channels must both be 2 (left, right)".into());
        }
        Ok(())
    }

    /// Number of past input samples that can influence one output sample.
    pub fn receptive_field(&self) -> usize {
        receptive_field(self.kernel_size, self.layers)
    }
}

/// Two convolutions per block with dilation doubling per block.
pub fn receptive_field(kernel_size: usize, layers: usize) -> usize {
    1 + 2 * (kernel_size - 1) * ((1usize << layers) - 1)
}
