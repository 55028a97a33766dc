use std::path::Path;

use super::{DataError, Dataset, Split};
use crate::numerics::Matrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads an IDX image/label pair (the MNIST layout).
///
/// Each image becomes one row of `rows·cols` pixels scaled to `[0, 1]`.
/// The class count is one more than the largest label present.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let (img_path, lbl_path) = (images.as_ref(), labels.as_ref());
    let img_bytes = read(img_path)?;
    let lbl_bytes = read(lbl_path)?;
    let img_name = img_path.display().to_string();
    let lbl_name = lbl_path.display().to_string();

    let img_dims = header(&img_bytes, IDX_IMAGES_MAGIC, 3, &img_name)?;
    let lbl_dims = header(&lbl_bytes, IDX_LABELS_MAGIC, 1, &lbl_name)?;
    let (count, rows, cols) = (img_dims[0], img_dims[1], img_dims[2]);
    if lbl_dims[0] != count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: lbl_dims[0],
        });
    }

    let width = rows * cols;
    let pixels = body(&img_bytes, 16, count * width, &img_name)?;
    let raw_labels = body(&lbl_bytes, 8, count, &lbl_name)?;
    let features = Matrix::from_vec(count, width, pixels.iter().map(|&p| f64::from(p) / 255.0).collect())
        .expect("sized from header");
    let labels: Vec<usize> = raw_labels.iter().map(|&l| usize::from(l)).collect();
    let classes = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(features, labels, classes, Split::Train)
}

fn read(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn header(bytes: &[u8], magic: u32, ndims: usize, path: &str) -> Result<Vec<usize>, DataError> {
    let need = 4 + 4 * ndims;
    let short = |have: usize| DataError::Format {
        path: path.into(),
        message: format!("header needs {need} bytes, file has {have}"),
    };
    if bytes.len() < 4 {
        return Err(short(bytes.len()));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    if word(0) != magic {
        return Err(DataError::BadMagic {
            path: path.into(),
            found: word(0),
            expected: magic,
        });
    }
    if bytes.len() < need {
        return Err(short(bytes.len()));
    }
    Ok((1..=ndims).map(|i| word(i) as usize).collect())
}

fn body<'a>(bytes: &'a [u8], offset: usize, len: usize, path: &str) -> Result<&'a [u8], DataError> {
    let available = bytes.len() - offset;
    if available != len {
        return Err(DataError::Format {
            path: path.into(),
            message: format!("header promises {len} data bytes, file has {available}"),
        });
    }
    Ok(&bytes[offset..])
}

/// Serializes images (each `rows·cols` bytes) in the IDX image layout.
pub fn encode_idx_images(images: &[Vec<u8>], rows: u32, cols: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * (rows * cols) as usize);
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    for img in images {
        assert_eq!(img.len(), (rows * cols) as usize, "image size does not match dims");
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(images: &[u8], labels: &[u8]) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("images.idx");
        let lp = dir.path().join("labels.idx");
        std::fs::write(&ip, images).unwrap();
        std::fs::write(&lp, labels).unwrap();
        (dir, ip, lp)
    }

    #[test]
    fn handcrafted_two_by_two() {
        let images = encode_idx_images(&[vec![0, 255, 51, 0], vec![0, 0, 0, 0]], 2, 2);
        let (_dir, ip, lp) = pair(&images, &encode_idx_labels(&[3, 1]));
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.features().shape(), (2, 4));
        assert_eq!(ds.features().row(0), &[0.0, 1.0, 0.2, 0.0]);
        assert_eq!(ds.features().row(1), &[0.0; 4]);
        assert_eq!(ds.labels(), &[3, 1]);
        assert_eq!(ds.classes(), 4);
    }

    #[test]
    fn count_mismatch_and_bad_magic() {
        let images = encode_idx_images(&[vec![1, 2, 3, 4]], 2, 2);
        let (_d, ip, lp) = pair(&images, &encode_idx_labels(&[0, 1]));
        assert_eq!(
            load_idx(&ip, &lp).unwrap_err(),
            DataError::CountMismatch { images: 1, labels: 2 }
        );
        let (_d, ip, lp) = pair(&encode_idx_labels(&[0]), &encode_idx_labels(&[0]));
        assert!(matches!(load_idx(&ip, &lp), Err(DataError::BadMagic { found: 0x801, .. })));
    }

    #[test]
    fn truncated_body_is_rejected() {
        let mut images = encode_idx_images(&[vec![1, 2, 3, 4]], 2, 2);
        images.pop();
        let (_d, ip, lp) = pair(&images, &encode_idx_labels(&[0]));
        assert!(matches!(load_idx(&ip, &lp), Err(DataError::Format { .. })));
    }
}
