//! Feedforward networks with explicit forward and backward passes.
//!
//! The bottom model (host side) and top model (guest side) of a split network
//! are both [`Network`]s; the input gradient returned by [`backward`] on the
//! top model is the cut-layer gradient sent back to the host.

mod checkpoint;
mod loss;
mod network;
mod optim;

use thiserror::Error;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use loss::{cross_entropy_soft, cross_entropy_unnormalized};
pub use network::{backward, forward, Activation, DenseLayer, Gradients, LayerGradient, Network, Trace};
pub use optim::{sgd_step, OptimizerState, Schedule};

use crate::numerics::{NumericsError, RngStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("input width {actual} does not match network input width {expected}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl From<NumericsError> for ModelError {
    fn from(e: NumericsError) -> Self {
        ModelError::ShapeMismatch(e.to_string())
    }
}

/// Layer widths of the split network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub bottom_hidden: usize,
    pub cut_width: usize,
    pub top_hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            bottom_hidden: 64,
            cut_width: 16,
            top_hidden: 32,
        }
    }
}

impl Architecture {
    /// Bottom model `input → hidden (relu) → cut_width`.
    ///
    /// The cut layer is left linear so the embedding carries signed values to
    /// the guest.
    pub fn bottom(&self, input_width: usize, rng: &mut RngStream) -> Result<Network, ModelError> {
        Network::mlp(
            &[input_width, self.bottom_hidden, self.cut_width],
            Activation::Identity,
            rng,
        )
    }

    /// Top model `cut_width → hidden (relu) → classes`, softmax in the loss.
    pub fn top(&self, classes: usize, rng: &mut RngStream) -> Result<Network, ModelError> {
        Network::mlp(
            &[self.cut_width, self.top_hidden, classes],
            Activation::SoftmaxAtLoss,
            rng,
        )
    }
}
