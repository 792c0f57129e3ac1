//! IDX image/label ingestion (the MNIST container format).
//!
//! Big-endian, magic 0x00000803 for image tensors and 0x00000801 for
//! label vectors. Pixels are scaled to [0, 1] row-major.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxTruncated {
            path: path.to_string(),
            needed: end,
            have: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(DenseMatrix, Vec<usize>)> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let img_name = images_path.display().to_string();
    let lbl_name = labels_path.display().to_string();

    let img = std::fs::read(images_path).map_err(|e| Error::io(&img_name, e))?;
    let lbl = std::fs::read(labels_path).map_err(|e| Error::io(&lbl_name, e))?;

    let magic = be_u32(&img, 0, &img_name)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::IdxMagicMismatch {
            path: img_name,
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(&img, 4, &img_name)? as usize;
    let rows = be_u32(&img, 8, &img_name)? as usize;
    let cols = be_u32(&img, 12, &img_name)? as usize;
    let pixels = n * rows * cols;
    if img.len() < 16 + pixels {
        return Err(Error::IdxTruncated {
            path: img_name,
            needed: 16 + pixels,
            have: img.len(),
        });
    }

    let magic = be_u32(&lbl, 0, &lbl_name)?;
    if magic != LABEL_MAGIC {
        return Err(Error::IdxMagicMismatch {
            path: lbl_name,
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let n_labels = be_u32(&lbl, 4, &lbl_name)? as usize;
    if lbl.len() < 8 + n_labels {
        return Err(Error::IdxTruncated {
            path: lbl_name,
            needed: 8 + n_labels,
            have: lbl.len(),
        });
    }
    if n != n_labels {
        return Err(Error::IdxCountMismatch {
            images: n,
            labels: n_labels,
        });
    }

    let dim = rows * cols;
    let mut features = DenseMatrix::zeros(n, dim);
    for i in 0..n {
        let src = &img[16 + i * dim..16 + (i + 1) * dim];
        let dst = features.row_mut(i);
        for (d, &b) in dst.iter_mut().zip(src) {
            *d = b as f64 / 255.0;
        }
    }
    let labels = lbl[8..8 + n].iter().map(|&b| b as usize).collect();
    Ok((features, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_images(dir: &std::path::Path, n: u32, rows: u32, cols: u32, data: &[u8]) -> std::path::PathBuf {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&n.to_be_bytes());
        bytes.extend_from_slice(&rows.to_be_bytes());
        bytes.extend_from_slice(&cols.to_be_bytes());
        bytes.extend_from_slice(data);
        let path = dir.join("images.idx");
        std::fs::write(&path, bytes).unwrap();
        path
    }

    fn write_labels(dir: &std::path::Path, magic: u32, labels: &[u8]) -> std::path::PathBuf {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&magic.to_be_bytes());
        bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        bytes.extend_from_slice(labels);
        let path = dir.join("labels.idx");
        std::fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn four_image_fixture_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        // 4 images of 2x3, bytes 0..24
        let pixels: Vec<u8> = (0..24).map(|v| (v * 10) as u8).collect();
        let images = write_images(dir.path(), 4, 2, 3, &pixels);
        let labels = write_labels(dir.path(), LABEL_MAGIC, &[0, 1, 2, 3]);
        let (features, lab) = load_idx(&images, &labels).unwrap();
        assert_eq!(features.nrows(), 4);
        assert_eq!(features.ncols(), 6);
        assert_eq!(lab, vec![0, 1, 2, 3]);
        assert_eq!(features.get(0, 0), 0.0);
        assert!((features.get(1, 0) - 60.0 / 255.0).abs() < 1e-15);
        for i in 0..4 {
            for j in 0..6 {
                assert!((0.0..=1.0).contains(&features.get(i, j)));
            }
        }
    }

    #[test]
    fn wrong_label_magic_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let images = write_images(dir.path(), 1, 1, 1, &[7]);
        let labels = write_labels(dir.path(), 0x0000_0802, &[0]);
        assert!(matches!(
            load_idx(&images, &labels),
            Err(Error::IdxMagicMismatch { .. })
        ));
    }

    #[test]
    fn empty_image_file_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("empty.idx");
        std::fs::write(&images, []).unwrap();
        let labels = write_labels(dir.path(), LABEL_MAGIC, &[0]);
        assert!(matches!(
            load_idx(&images, &labels),
            Err(Error::IdxTruncated { .. })
        ));
    }

    #[test]
    fn short_pixel_payload_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let images = write_images(dir.path(), 2, 2, 2, &[1, 2, 3]); // needs 8 bytes
        let labels = write_labels(dir.path(), LABEL_MAGIC, &[0, 1]);
        assert!(matches!(
            load_idx(&images, &labels),
            Err(Error::IdxTruncated { .. })
        ));
    }

    #[test]
    fn count_mismatch_is_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let images = write_images(dir.path(), 2, 1, 1, &[1, 2]);
        let labels = write_labels(dir.path(), LABEL_MAGIC, &[0, 1, 2]);
        assert!(matches!(
            load_idx(&images, &labels),
            Err(Error::IdxCountMismatch {
                images: 2,
                labels: 3
            })
        ));
    }
}
