//! Split-learning security laboratory.
//!
//! Two parties train one network split at a cut layer: the host owns the
//! features and the bottom model, the guest owns the labels and the top model.
//! This crate implements that protocol together with the label-inference
//! attacks an honest-but-curious host can mount from the cut-layer gradients
//! it receives, and the SecDT defense run by the guest (label dimension
//! transformation, gradient normalization, softmax-normalized Gaussian label
//! noise).

pub mod attacks;
pub mod data;
mod error;
pub mod experiment;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod secdt;
pub mod splitproto;

pub use error::{Error, Result};
