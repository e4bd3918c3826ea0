//! A small neural network with hand-written reverse-mode gradients.
//!
//! Inputs are the five feature blocks; the genre embedding table and the
//! tanh Elman encoder over the daily series are trained jointly with the
//! trunk. Heads are hazard (sigmoid per interval), binary or regression.

mod adam;
mod checkpoint;
mod loss;
mod network;
mod spec;
mod tensor;
mod train;

pub use adam::{adam_step, AdamConfig};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use loss::{binary_cross_entropy, squared_error};
pub use network::{Example, Gradients, HeadTarget, ModelState, Network};
pub use spec::{Activation, FeatureMask, HeadKind, HeadSpec, InputSpec, LayerSpec, ModelSpec};
pub use tensor::Tensor;
pub use train::{train, EpochRecord, TrainConfig, TrainOutcome};
