use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CutLayerMessage, Frame, GradientMessage};
use crate::numerics::Matrix;
use crate::{Error, Result};

/// Inclusive range of epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochWindow {
    pub first: u32,
    pub last: u32,
}

impl EpochWindow {
    pub const ALL: EpochWindow = EpochWindow {
        first: 0,
        last: u32::MAX,
    };

    /// Matches no epoch; a tap with this window records nothing.
    pub const NONE: EpochWindow = EpochWindow { first: 1, last: 0 };

    pub fn new(first: u32, last: u32) -> Self {
        Self { first, last }
    }

    pub fn single(epoch: u32) -> Self {
        Self::new(epoch, epoch)
    }

    pub fn contains(&self, epoch: u32) -> bool {
        (self.first..=self.last).contains(&epoch)
    }
}

/// Which half of the cut-layer traffic an attack reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapSource {
    Embeddings,
    Gradients,
}

/// Per-sample rows gathered from the tap, ordered by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub sample_ids: Vec<u64>,
    pub rows: Matrix,
}

/// The host's passive log of everything that crossed the cut layer.
///
/// Append-only and kept in arrival order. Only messages whose epoch falls in
/// the capture window are recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTap {
    window: EpochWindow,
    log: Vec<Frame>,
}

impl GradientTap {
    pub fn new(window: EpochWindow) -> Self {
        Self {
            window,
            log: Vec::new(),
        }
    }

    pub fn window(&self) -> EpochWindow {
        self.window
    }

    pub fn record_embedding(&mut self, msg: &CutLayerMessage) {
        if self.window.contains(msg.epoch) {
            self.log.push(Frame::Embedding(msg.clone()));
        }
    }

    pub fn record_gradient(&mut self, msg: &GradientMessage) {
        if self.window.contains(msg.epoch) {
            self.log.push(Frame::Gradient(msg.clone()));
        }
    }

    pub fn frames(&self) -> &[Frame] {
        &self.log
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    pub fn gradient_messages(&self) -> impl Iterator<Item = &GradientMessage> {
        self.log.iter().filter_map(|f| match f {
            Frame::Gradient(g) => Some(g),
            _ => None,
        })
    }

    pub fn embedding_messages(&self) -> impl Iterator<Item = &CutLayerMessage> {
        self.log.iter().filter_map(|f| match f {
            Frame::Embedding(e) => Some(e),
            _ => None,
        })
    }

    /// Latest epoch with any recorded traffic.
    pub fn last_epoch(&self) -> Option<u32> {
        self.log.iter().map(Frame::epoch).max()
    }

    /// Per-sample rows of `source` within `window`. When a sample was seen
    /// more than once, the latest observation wins.
    pub fn observations(&self, source: TapSource, window: EpochWindow) -> Result<Observations> {
        let mut latest: BTreeMap<u64, &[f64]> = BTreeMap::new();
        let mut width = None;
        for frame in &self.log {
            let matches = matches!(
                (source, frame),
                (TapSource::Embeddings, Frame::Embedding(_)) | (TapSource::Gradients, Frame::Gradient(_))
            );
            if !matches || !window.contains(frame.epoch()) {
                continue;
            }
            let payload = frame.payload();
            width = Some(payload.cols());
            for (i, &id) in frame.sample_ids().iter().enumerate() {
                latest.insert(id, payload.row(i));
            }
        }
        let Some(width) = width.filter(|_| !latest.is_empty()) else {
            return Err(Error::InvalidArgument(format!(
                "tap holds no {source:?} in epochs {}..={}",
                window.first, window.last
            )));
        };
        let mut data = Vec::with_capacity(latest.len() * width);
        let mut sample_ids = Vec::with_capacity(latest.len());
        for (id, row) in latest {
            sample_ids.push(id);
            data.extend_from_slice(row);
        }
        let rows = Matrix::from_vec(sample_ids.len(), width, data)?;
        Ok(Observations { sample_ids, rows })
    }

    /// Checks that every recorded embedding batch has exactly one gradient
    /// reply with the same epoch, batch id and sample ids.
    pub fn check_conservation(&self) -> Result<()> {
        let mut replies: BTreeMap<(u32, u32), Vec<&GradientMessage>> = BTreeMap::new();
        for g in self.gradient_messages() {
            replies.entry((g.epoch, g.batch_id)).or_default().push(g);
        }
        let mut requests = 0usize;
        for e in self.embedding_messages() {
            requests += 1;
            let found = replies.get(&(e.epoch, e.batch_id)).map_or(&[][..], Vec::as_slice);
            let matching = found.iter().filter(|g| g.answers(e)).count();
            if found.len() != 1 || matching != 1 {
                return Err(Error::Protocol(format!(
                    "epoch {} batch {} has {} gradient replies ({matching} matching)",
                    e.epoch,
                    e.batch_id,
                    found.len()
                )));
            }
        }
        let total_replies: usize = replies.values().map(Vec::len).sum();
        if total_replies != requests {
            return Err(Error::Protocol(format!(
                "{total_replies} gradient replies for {requests} embedding batches"
            )));
        }
        Ok(())
    }

    /// SHA-256 over the full log; used to verify attacks leave the tap untouched.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for frame in &self.log {
            h.update([matches!(frame, Frame::Gradient(_)) as u8]);
            h.update(frame.epoch().to_le_bytes());
            h.update(frame.batch_id().to_le_bytes());
            for id in frame.sample_ids() {
                h.update(id.to_le_bytes());
            }
            for v in frame.payload().as_slice() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}
