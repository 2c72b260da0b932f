use std::ops::Range;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Activation, DropoutKind, TcnConfig};
use super::conv::{dilated_causal_conv, dilated_causal_conv_backward, ConvWeights, Sequence};
use crate::error::{Error, Result};

/// Name, shape and element offset of one parameter tensor in the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorInfo {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.numel()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvSlot {
    weight: Range<usize>,
    bias: Range<usize>,
    out_channels: usize,
    in_channels: usize,
    kernel: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct BlockLayout {
    dilation: usize,
    conv1: ConvSlot,
    conv2: ConvSlot,
    downsample: Option<ConvSlot>,
}

struct LayoutBuilder {
    tensors: Vec<TensorInfo>,
    size: usize,
}

impl LayoutBuilder {
    fn tensor(&mut self, name: String, shape: Vec<usize>) -> Range<usize> {
        let info = TensorInfo {
            name,
            shape,
            offset: self.size,
        };
        self.size += info.numel();
        let r = info.range();
        self.tensors.push(info);
        r
    }

    fn conv(&mut self, prefix: &str, out_channels: usize, in_channels: usize, kernel: usize) -> ConvSlot {
        ConvSlot {
            weight: self.tensor(
                format!("{prefix}.weight"),
                vec![out_channels, in_channels, kernel],
            ),
            bias: self.tensor(format!("{prefix}.bias"), vec![out_channels]),
            out_channels,
            in_channels,
            kernel,
        }
    }
}

/// Dropout masks of a train-mode forward pass, two per residual block.
/// `None` marks an identity mask (eval mode or dropout 0).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks(pub Vec<[Option<Sequence>; 2]>);

pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

struct BlockTape {
    input: Sequence,
    z1: Sequence,
    o1: Sequence,
    z2: Sequence,
    sum: Sequence,
}

/// Intermediates of one forward pass, consumed by [`TcnModel::backward`].
pub struct Tape {
    generation: u64,
    input_len: usize,
    blocks: Vec<BlockTape>,
    head_input: Sequence,
    masks: DropoutMasks,
}

impl Tape {
    pub fn masks(&self) -> &DropoutMasks {
        &self.masks
    }

    /// Output of every residual block, in order.
    pub fn block_outputs(&self) -> Vec<&Sequence> {
        self.blocks
            .iter()
            .skip(1)
            .map(|b| &b.input)
            .chain(std::iter::once(&self.head_input))
            .collect()
    }
}

/// Temporal convolutional network: residual blocks of two dilated causal
/// convolutions followed by a 1x1 output head.
#[derive(Debug, Clone)]
pub struct TcnModel {
    config: TcnConfig,
    tensors: Vec<TensorInfo>,
    blocks: Vec<BlockLayout>,
    head: ConvSlot,
    params: Vec<f64>,
    generation: u64,
}

impl PartialEq for TcnModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

impl TcnModel {
    /// Builds a network with uniform `+-sqrt(1/fan_in)` weights and zero
    /// biases drawn from `config.seed`. Values are rounded to `f32` so
    /// checkpoints reproduce them exactly.
    pub fn new(config: TcnConfig) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        for info in &model.tensors {
            if info.shape.len() != 3 {
                continue;
            }
            let fan_in = (info.shape[1] * info.shape[2]) as f64;
            let bound = (1.0 / fan_in).sqrt();
            for p in &mut model.params[info.range()] {
                *p = rng.gen_range(-bound..bound) as f32 as f64;
            }
        }
        Ok(model)
    }

    pub fn zeros(config: TcnConfig) -> Result<Self> {
        config.validate_structure()?;
        let (lb, blocks, head) = layout(&config);
        Ok(Self {
            config,
            tensors: lb.tensors,
            blocks,
            head,
            params: vec![0.0; lb.size],
            generation: 0,
        })
    }

    pub fn from_params(config: TcnConfig, params: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        if params.len() != model.params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &TcnConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &self.params[t.range()])
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access. Any tape recorded before this call becomes stale.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.tensors.iter().find(|t| t.name == name)?.range();
        Some(&mut self.params_mut()[range])
    }

    fn weights(&self, slot: &ConvSlot) -> ConvWeights<'_> {
        ConvWeights {
            weight: &self.params[slot.weight.clone()],
            bias: &self.params[slot.bias.clone()],
            out_channels: slot.out_channels,
            in_channels: slot.in_channels,
            kernel: slot.kernel,
        }
    }

    /// Forward pass. In train mode fresh inverted-dropout masks are drawn from
    /// the supplied generator; eval mode applies no dropout.
    pub fn forward(&self, x: &Sequence, mode: Mode<'_>) -> Result<(Sequence, Tape)> {
        let p = self.config.dropout;
        let masks = match mode {
            Mode::Train(rng) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                let mut draw = || {
                    let mut m = Sequence::zeros(self.config.channels, x.len());
                    match self.config.dropout_kind {
                        DropoutKind::Channel => {
                            for c in 0..self.config.channels {
                                let v = if rng.gen::<f64>() < p { 0.0 } else { keep };
                                m.row_mut(c).fill(v);
                            }
                        }
                        DropoutKind::Element => {
                            for v in m.data_mut() {
                                *v = if rng.gen::<f64>() < p { 0.0 } else { keep };
                            }
                        }
                    }
                    Some(m)
                };
                DropoutMasks((0..self.config.layers).map(|_| [draw(), draw()]).collect())
            }
            _ => DropoutMasks((0..self.config.layers).map(|_| [None, None]).collect()),
        };
        self.forward_with_masks(x, masks)
    }

    /// Forward pass with explicitly supplied dropout masks.
    pub fn forward_with_masks(&self, x: &Sequence, masks: DropoutMasks) -> Result<(Sequence, Tape)> {
        if x.channels() != self.config.in_channels {
            return Err(Error::invalid(format!(
                "input has {} channels, model expects {}",
                x.channels(),
                self.config.in_channels
            )));
        }
        if masks.0.len() != self.config.layers
            || masks.0.iter().flatten().flatten().any(|m| {
                m.channels() != self.config.channels || m.len() != x.len()
            })
        {
            return Err(Error::invalid("dropout masks do not match the model and input"));
        }
        let act = self.config.hidden_activation;
        let mut tapes = Vec::with_capacity(self.config.layers);
        let mut h = x.clone();
        for (block, mask) in self.blocks.iter().zip(&masks.0) {
            let z1 = dilated_causal_conv(&h, self.weights(&block.conv1), block.dilation)?;
            let o1 = activate_and_drop(&z1, act, mask[0].as_ref());
            let z2 = dilated_causal_conv(&o1, self.weights(&block.conv2), block.dilation)?;
            let mut sum = activate_and_drop(&z2, act, mask[1].as_ref());
            match &block.downsample {
                Some(ds) => sum.add_assign(&dilated_causal_conv(&h, self.weights(ds), 1)?),
                None => sum.add_assign(&h),
            }
            let out = sum.map(|v| act.apply(v));
            tapes.push(BlockTape {
                input: std::mem::replace(&mut h, out),
                z1,
                o1,
                z2,
                sum,
            });
        }
        let y = dilated_causal_conv(&h, self.weights(&self.head), 1)?;
        Ok((
            y,
            Tape {
                generation: self.generation,
                input_len: x.len(),
                blocks: tapes,
                head_input: h,
                masks,
            },
        ))
    }

    /// Eval-mode output only.
    pub fn predict(&self, x: &Sequence) -> Result<Sequence> {
        Ok(self.forward(x, Mode::Eval)?.0)
    }

    /// Gradient of a scalar loss with respect to every parameter, given the
    /// loss gradient at the network output. Layout matches [`Self::params`].
    pub fn backward(&self, tape: &Tape, grad_out: &Sequence) -> Result<Vec<f64>> {
        if tape.generation != self.generation || tape.blocks.len() != self.config.layers {
            return Err(Error::precondition(
                "tape was recorded before the parameters last changed",
            ));
        }
        if grad_out.channels() != self.config.out_channels || grad_out.len() != tape.input_len {
            return Err(Error::invalid("output gradient shape does not match the tape"));
        }
        let act = self.config.hidden_activation;
        let mut grads = vec![0.0; self.params.len()];

        let head = &self.head;
        let g = dilated_causal_conv_backward(&tape.head_input, self.weights(head), 1, grad_out);
        accumulate(&mut grads, head, &g.weight, &g.bias);
        let mut grad_h = g.input;

        for ((block, bt), mask) in self
            .blocks
            .iter()
            .zip(&tape.blocks)
            .zip(&tape.masks.0)
            .rev()
        {
            let grad_sum = zip_map(&grad_h, &bt.sum, |g, s| g * act.derivative(s));

            let grad_z2 = drop_and_deactivate(&grad_sum, &bt.z2, act, mask[1].as_ref());
            let g2 = dilated_causal_conv_backward(&bt.o1, self.weights(&block.conv2), block.dilation, &grad_z2);
            accumulate(&mut grads, &block.conv2, &g2.weight, &g2.bias);

            let grad_z1 = drop_and_deactivate(&g2.input, &bt.z1, act, mask[0].as_ref());
            let g1 = dilated_causal_conv_backward(&bt.input, self.weights(&block.conv1), block.dilation, &grad_z1);
            accumulate(&mut grads, &block.conv1, &g1.weight, &g1.bias);

            let mut grad_in = g1.input;
            match &block.downsample {
                Some(ds) => {
                    let gd = dilated_causal_conv_backward(&bt.input, self.weights(ds), 1, &grad_sum);
                    accumulate(&mut grads, ds, &gd.weight, &gd.bias);
                    grad_in.add_assign(&gd.input);
                }
                None => grad_in.add_assign(&grad_sum),
            }
            grad_h = grad_in;
        }
        Ok(grads)
    }

    /// Replaces the parameters after an optimizer step, rounding to `f32`.
    pub(crate) fn apply_update(&mut self, params: &[f64]) {
        self.generation += 1;
        for (p, &v) in self.params.iter_mut().zip(params) {
            *p = v as f32 as f64;
        }
    }
}

fn activate_and_drop(z: &Sequence, act: Activation, mask: Option<&Sequence>) -> Sequence {
    match mask {
        Some(m) => zip_map(z, m, |v, k| act.apply(v) * k),
        None => z.map(|v| act.apply(v)),
    }
}

fn drop_and_deactivate(
    grad: &Sequence,
    z: &Sequence,
    act: Activation,
    mask: Option<&Sequence>,
) -> Sequence {
    let mut out = zip_map(grad, z, |g, v| g * act.derivative(v));
    if let Some(m) = mask {
        for (o, k) in out.data_mut().iter_mut().zip(m.data()) {
            *o *= k;
        }
    }
    out
}

fn zip_map(a: &Sequence, b: &Sequence, f: impl Fn(f64, f64) -> f64) -> Sequence {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Sequence::from_vec(a.channels(), a.len(), data).expect("matching shapes")
}

fn accumulate(grads: &mut [f64], slot: &ConvSlot, w: &[f64], b: &[f64]) {
    for (g, v) in grads[slot.weight.clone()].iter_mut().zip(w) {
        *g += v;
    }
    for (g, v) in grads[slot.bias.clone()].iter_mut().zip(b) {
        *g += v;
    }
}

fn layout(config: &TcnConfig) -> (LayoutBuilder, Vec<BlockLayout>, ConvSlot) {
    let mut lb = LayoutBuilder {
        tensors: Vec::new(),
        size: 0,
    };
    let k = config.kernel_size;
    let mut blocks = Vec::with_capacity(config.layers);
    for i in 0..config.layers {
        let c_in = if i == 0 { config.in_channels } else { config.channels };
        let c = config.channels;
        let conv1 = lb.conv(&format!("blocks.{i}.conv1"), c, c_in, k);
        let conv2 = lb.conv(&format!("blocks.{i}.conv2"), c, c, k);
        let downsample = (c_in != c).then(|| lb.conv(&format!("blocks.{i}.downsample"), c, c_in, 1));
        blocks.push(BlockLayout {
            dilation: 1 << i,
            conv1,
            conv2,
            downsample,
        });
    }
    let head = lb.conv("head", config.out_channels, config.channels, 1);
    (lb, blocks, head)
}
