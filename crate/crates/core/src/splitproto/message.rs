use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;

/// Host → guest: the bottom model's output `z = E(X)` for one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutLayerMessage {
    pub epoch: u32,
    pub batch_id: u32,
    pub sample_ids: Vec<u64>,
    pub embeddings: Matrix,
}

/// Guest → host: the loss gradient w.r.t. the embeddings of one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientMessage {
    pub epoch: u32,
    pub batch_id: u32,
    pub sample_ids: Vec<u64>,
    pub gradients: Matrix,
}

impl GradientMessage {
    /// True when this message answers `request`: same epoch, batch, sample
    /// ids and payload shape.
    pub fn answers(&self, request: &CutLayerMessage) -> bool {
        self.epoch == request.epoch
            && self.batch_id == request.batch_id
            && self.sample_ids == request.sample_ids
            && self.gradients.shape() == request.embeddings.shape()
    }
}

/// Either message, as carried on the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Embedding(CutLayerMessage),
    Gradient(GradientMessage),
}

impl Frame {
    pub fn epoch(&self) -> u32 {
        match self {
            Frame::Embedding(m) => m.epoch,
            Frame::Gradient(m) => m.epoch,
        }
    }

    pub fn batch_id(&self) -> u32 {
        match self {
            Frame::Embedding(m) => m.batch_id,
            Frame::Gradient(m) => m.batch_id,
        }
    }

    pub fn sample_ids(&self) -> &[u64] {
        match self {
            Frame::Embedding(m) => &m.sample_ids,
            Frame::Gradient(m) => &m.sample_ids,
        }
    }

    pub fn payload(&self) -> &Matrix {
        match self {
            Frame::Embedding(m) => &m.embeddings,
            Frame::Gradient(m) => &m.gradients,
        }
    }
}
