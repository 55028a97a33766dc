//! Framed binary codec for cut-layer traffic.
//!
//! Each frame is a little-endian `u32` length prefix counting the bytes that
//! follow it, then:
//!
//! ```text
//! 0x53 0x4C ("SL") | version u8 = 1 | msg_type u8 (1 = embedding, 2 = gradient)
//! epoch u32 | batch_id u32 | rows u32 | cols u32
//! sample_ids u64 × rows | payload f32 × rows·cols (row-major)
//! ```
//!
//! The header is 20 bytes. Frames are self-delimiting, so a trace file is a
//! plain concatenation of frames.

use std::path::Path;

use thiserror::Error;

use super::{CutLayerMessage, Frame, GradientMessage};
use crate::numerics::Matrix;

pub const FRAME_MAGIC: [u8; 2] = [0x53, 0x4C];
pub const FRAME_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
pub const PREFIX_LEN: usize = 4;
pub const TRACE_EXTENSION: &str = "sltrace";

const TYPE_EMBEDDING: u8 = 1;
const TYPE_GRADIENT: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("frame of {rows}x{cols} values does not fit the u32 size fields")]
    TooLarge { rows: usize, cols: usize },
    #[error("{sample_ids} sample ids for {rows} payload rows")]
    IdCountMismatch { sample_ids: usize, rows: usize },
    #[error("truncated frame: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("bad frame magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported message type {0}")]
    UnsupportedType(u8),
    #[error("length prefix says {declared} bytes but the header implies {implied}")]
    LengthMismatch { declared: usize, implied: usize },
    #[error("trace file {path}: {message}")]
    Io { path: String, message: String },
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, CodecError> {
    let (msg_type, payload) = match frame {
        Frame::Embedding(m) => (TYPE_EMBEDDING, &m.embeddings),
        Frame::Gradient(m) => (TYPE_GRADIENT, &m.gradients),
    };
    let (rows, cols) = payload.shape();
    let ids = frame.sample_ids();
    if ids.len() != rows {
        return Err(CodecError::IdCountMismatch {
            sample_ids: ids.len(),
            rows,
        });
    }
    let too_large = || CodecError::TooLarge { rows, cols };
    let rows32 = u32::try_from(rows).map_err(|_| too_large())?;
    let cols32 = u32::try_from(cols).map_err(|_| too_large())?;
    rows32.checked_mul(cols32).ok_or_else(too_large)?;
    let body_len = body_len(rows, cols).ok_or_else(too_large)?;
    let prefix = u32::try_from(body_len).map_err(|_| too_large())?;

    let mut out = Vec::with_capacity(PREFIX_LEN + body_len);
    out.extend_from_slice(&prefix.to_le_bytes());
    out.extend_from_slice(&FRAME_MAGIC);
    out.push(FRAME_VERSION);
    out.push(msg_type);
    out.extend_from_slice(&frame.epoch().to_le_bytes());
    out.extend_from_slice(&frame.batch_id().to_le_bytes());
    out.extend_from_slice(&rows32.to_le_bytes());
    out.extend_from_slice(&cols32.to_le_bytes());
    for id in ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    for &v in payload.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

fn body_len(rows: usize, cols: usize) -> Option<usize> {
    let ids = rows.checked_mul(8)?;
    let payload = rows.checked_mul(cols)?.checked_mul(4)?;
    HEADER_LEN.checked_add(ids)?.checked_add(payload)
}

/// Decodes the frame at the start of `bytes`, returning it with the number
/// of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, usize), CodecError> {
    if bytes.len() < PREFIX_LEN {
        return Err(CodecError::Truncated {
            expected: PREFIX_LEN,
            actual: bytes.len(),
        });
    }
    let declared = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let total = PREFIX_LEN + declared;
    if bytes.len() < total {
        return Err(CodecError::Truncated {
            expected: total,
            actual: bytes.len(),
        });
    }
    let body = &bytes[PREFIX_LEN..total];
    if body.len() < HEADER_LEN {
        return Err(CodecError::Truncated {
            expected: PREFIX_LEN + HEADER_LEN,
            actual: total,
        });
    }
    let magic = [body[0], body[1]];
    if magic != FRAME_MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    if body[2] != FRAME_VERSION {
        return Err(CodecError::UnsupportedVersion(body[2]));
    }
    let msg_type = body[3];
    if msg_type != TYPE_EMBEDDING && msg_type != TYPE_GRADIENT {
        return Err(CodecError::UnsupportedType(msg_type));
    }
    let u32_at = |off: usize| u32::from_le_bytes(body[off..off + 4].try_into().expect("4 bytes"));
    let epoch = u32_at(4);
    let batch_id = u32_at(8);
    let rows = u32_at(12) as usize;
    let cols = u32_at(16) as usize;
    let implied = body_len(rows, cols).ok_or(CodecError::TooLarge { rows, cols })?;
    if implied != declared {
        return Err(CodecError::LengthMismatch { declared, implied });
    }

    let ids_end = HEADER_LEN + rows * 8;
    let sample_ids = body[HEADER_LEN..ids_end]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let values = body[ids_end..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    let payload = Matrix::from_vec(rows, cols, values).expect("length validated");
    let frame = if msg_type == TYPE_EMBEDDING {
        Frame::Embedding(CutLayerMessage {
            epoch,
            batch_id,
            sample_ids,
            embeddings: payload,
        })
    } else {
        Frame::Gradient(GradientMessage {
            epoch,
            batch_id,
            sample_ids,
            gradients: payload,
        })
    };
    Ok((frame, total))
}

/// Decodes a concatenation of frames.
pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<Frame>, CodecError> {
    let mut frames = Vec::new();
    while !bytes.is_empty() {
        let (frame, used) = decode_frame(bytes)?;
        frames.push(frame);
        bytes = &bytes[used..];
    }
    Ok(frames)
}

pub fn write_trace<'a>(
    path: impl AsRef<Path>,
    frames: impl IntoIterator<Item = &'a Frame>,
) -> Result<(), CodecError> {
    let mut buf = Vec::new();
    for f in frames {
        buf.extend(encode_frame(f)?);
    }
    std::fs::write(path.as_ref(), buf).map_err(|e| CodecError::Io {
        path: path.as_ref().display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<Frame>, CodecError> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| CodecError::Io {
        path: path.as_ref().display().to_string(),
        message: e.to_string(),
    })?;
    decode_stream(&bytes)
}
