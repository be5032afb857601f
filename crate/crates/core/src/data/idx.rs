//! Classic MNIST-style IDX files: big-endian `u32` magic, `u32` dimensions,
//! then a `u8` payload.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::Dataset;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn header(path: &Path, cur: &mut Cursor<Vec<u8>>, magic: u32, dims: usize) -> Result<Vec<usize>> {
    let truncated = |_| Error::Truncated { path: path.to_path_buf() };
    let found = cur.read_u32::<BigEndian>().map_err(truncated)?;
    if found != magic {
        return Err(Error::WrongMagic { path: path.to_path_buf(), expected: magic, found });
    }
    (0..dims).map(|_| cur.read_u32::<BigEndian>().map(|d| d as usize).map_err(truncated)).collect()
}

fn payload(path: &Path, cur: &mut Cursor<Vec<u8>>, len: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; len];
    cur.read_exact(&mut buf).map_err(|_| Error::Truncated { path: path.to_path_buf() })?;
    Ok(buf)
}

/// Loads an image/label IDX pair; pixels are scaled to `[0, 1]` by `/ 255`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());

    let mut cur = Cursor::new(read_file(images_path)?);
    let dims = header(images_path, &mut cur, IDX_IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let pixels = payload(images_path, &mut cur, count * rows * cols)?;

    let mut cur = Cursor::new(read_file(labels_path)?);
    let label_count = header(labels_path, &mut cur, IDX_LABELS_MAGIC, 1)?[0];
    let labels: Vec<usize> = payload(labels_path, &mut cur, label_count)?.into_iter().map(usize::from).collect();

    if label_count != count {
        return Err(Error::CountMismatch { images: count, labels: label_count });
    }
    let features = pixels.into_iter().map(|p| f64::from(p) / 255.0).collect();
    let num_classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Dataset::new(features, rows * cols, labels, num_classes)
}

pub fn write_idx_images(path: impl AsRef<Path>, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let per_image = rows * cols;
    if per_image == 0 || !pixels.len().is_multiple_of(per_image) {
        return Err(Error::invalid("pixels", "length must be a multiple of rows * cols"));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, (pixels.len() / per_image) as u32, rows as u32, cols as u32] {
        out.write_u32::<BigEndian>(v).expect("writing to a Vec cannot fail");
    }
    out.extend_from_slice(pixels);
    std::fs::write(path, out).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(8 + labels.len());
    for v in [IDX_LABELS_MAGIC, labels.len() as u32] {
        out.write_u32::<BigEndian>(v).expect("writing to a Vec cannot fail");
    }
    out.extend_from_slice(labels);
    std::fs::write(path, out).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Hand-encoded: magic 0x00000803, count 2, rows 2, cols 2, then 8 pixels.
    const IMAGES: [u8; 24] = [
        0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, //
        0, 51, 102, 255, 255, 0, 0, 17,
    ];
    const LABELS: [u8; 10] = [0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 1, 0];

    fn fixture(images: &[u8], labels: &[u8]) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("images.idx"), dir.path().join("labels.idx"));
        std::fs::write(&ip, images).unwrap();
        std::fs::write(&lp, labels).unwrap();
        (dir, ip, lp)
    }

    #[test]
    fn decodes_hand_encoded_big_endian_fixture() {
        let (_dir, ip, lp) = fixture(&IMAGES, &LABELS);
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 4));
        assert_eq!(ds.row(0), &[0.0, 0.2, 0.4, 1.0]);
        assert_eq!(ds.row(1)[0], 1.0);
        assert_eq!(ds.labels(), &[1, 0]);
        assert!(ds.features().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn writer_round_trip_matches_fixture_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx_images(&ip, 2, 2, &IMAGES[16..]).unwrap();
        write_idx_labels(&lp, &LABELS[8..]).unwrap();
        assert_eq!(std::fs::read(&ip).unwrap(), IMAGES);
        assert_eq!(std::fs::read(&lp).unwrap(), LABELS);
    }

    #[test]
    fn labels_with_image_magic_is_rejected() {
        let mut bad = LABELS;
        bad[3] = 0x03;
        let (_dir, ip, lp) = fixture(&IMAGES, &bad);
        let err = load_idx(&ip, &lp).unwrap_err();
        assert!(matches!(err, Error::WrongMagic { found: 0x803, .. }));
        assert!(err.to_string().contains("wrong magic"));
    }

    #[test]
    fn truncated_and_mismatched_counts() {
        let (_dir, ip, lp) = fixture(&IMAGES[..20], &LABELS);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Truncated { .. })));
        let three = [0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x03, 1, 0, 1];
        let (_dir, ip, lp) = fixture(&IMAGES, &three);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::CountMismatch { images: 2, labels: 3 })));
    }
}
