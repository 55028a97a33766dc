//! Versioned binary checkpoint for [`Network`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SLMD" | version u16 | layer count u32 |
//!   per layer: in u32 | out u32 | activation u8 | weights f64 × (out·in) | bias f64 × out
//! ```

use std::path::Path;

use super::{Activation, DenseLayer, ModelError, Network};
use crate::numerics::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SLMD";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn encode_checkpoint(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + net.parameter_count() * 8 + net.layers().len() * 9);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.in_width() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.out_width() as u32).to_le_bytes());
        out.push(layer.activation().code());
        for w in layer.weights().as_slice() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in layer.bias() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network, ModelError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(ModelError::Checkpoint("bad magic, not a model checkpoint".into()));
    }
    let version = u16::from_le_bytes(r.array()?);
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let count = u32::from_le_bytes(r.array()?) as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let inputs = u32::from_le_bytes(r.array()?) as usize;
        let outputs = u32::from_le_bytes(r.array()?) as usize;
        let act_code = r.take(1)?[0];
        let activation = Activation::from_code(act_code).ok_or_else(|| {
            ModelError::Checkpoint(format!("layer {i} has unknown activation code {act_code}"))
        })?;
        let weights = r.f64s(inputs * outputs)?;
        let bias = r.f64s(outputs)?;
        let weights = Matrix::from_vec(outputs, inputs, weights)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        layers.push(DenseLayer::new(weights, bias, activation)?);
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Checkpoint(format!(
            "{} trailing bytes after the last layer",
            bytes.len() - r.pos
        )));
    }
    Network::new(layers)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path.as_ref(), encode_checkpoint(net))
        .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.as_ref().display())))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network, ModelError> {
    let bytes = std::fs::read(path.as_ref())
        .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.as_ref().display())))?;
    decode_checkpoint(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            ModelError::Checkpoint(format!(
                "truncated checkpoint: need {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| {
            ModelError::Checkpoint("layer size overflows".into())
        })?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = RngStream::new(12);
        let net = Network::mlp(&[5, 4, 3], Activation::SoftmaxAtLoss, &mut rng).unwrap();
        let bytes = encode_checkpoint(&net);
        assert_eq!(&bytes[..4], b"SLMD");
        assert_eq!(decode_checkpoint(&bytes).unwrap(), net);
    }

    #[test]
    fn rejects_corruption() {
        let mut rng = RngStream::new(12);
        let net = Network::mlp(&[2, 2], Activation::Identity, &mut rng).unwrap();
        let bytes = encode_checkpoint(&net);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut versioned = bytes.clone();
        versioned[4] = 9;
        assert!(decode_checkpoint(&versioned).is_err());
    }
}
