//! Learning direction-to-direction HRIR mappings with temporal convolutional
//! networks, plus the objective and behavioural scoring used to judge them.

pub mod dsp;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod pipeline;
pub mod tcn;

pub use error::{Error, Result};
