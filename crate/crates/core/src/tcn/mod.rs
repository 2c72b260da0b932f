//! Temporal convolutional network with hand-written reverse-mode gradients,
//! Adam with coupled L2 weight decay, full-batch training and checkpoints.

mod adam;
pub mod checkpoint;
mod config;
mod conv;
mod model;
mod train;

pub use adam::{adam_step, OptimizerState};
pub use config::{ranges, receptive_field, Activation, DropoutKind, TcnConfig};
pub use conv::{dilated_causal_conv, ConvWeights, Sequence};
pub use model::{DropoutMasks, Mode, Tape, TcnModel, TensorInfo};
pub use train::{
    evaluate_pairs, pair_to_sequence, sequence_to_pair, train, EpochMetrics, PairMetrics,
    SetMetrics, TrainOptions, TrainRecord, TrainingPair,
};

#[cfg(test)]
mod tests;
