//! Hand-intent tokens: keypoint adapter, confidence gating, interleaving and
//! a toy option scorer.

pub mod adapter;
pub mod check;
pub mod dataset;
pub mod interleave;
pub mod linalg;
pub mod toy;

pub use adapter::{
    adapter_backward, adapter_forward, gelu, layer_norm, AdapterCheckpoint, AdapterGrads, AdapterParams, GateConfig,
    HandIntentToken, KeypointNorm,
};
pub use interleave::{interleave, token_overhead, Element, InterleavedSequence, VisualTokenBlock};
pub use linalg::Matrix;
pub use toy::{toy_score, toy_train, ToyExample, ToySequenceModel, TrainConfig};
