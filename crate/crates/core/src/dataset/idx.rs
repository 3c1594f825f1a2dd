//! IDX container reader (the MNIST distribution format).
//!
//! Files are big-endian: a 4-byte magic (`0x00000803` for 3-d unsigned-byte
//! images, `0x00000801` for 1-d unsigned-byte labels), one `u32` per
//! dimension, then the raw payload. Gzipped files are detected by their
//! `1f 8b` prefix and decompressed transparently.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::ImageGrid;
use crate::error::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn truncated(path: &Path, offset: usize, expected: usize, found: usize) -> Error {
    Error::Truncated {
        path: path.to_path_buf(),
        offset: offset as u64,
        expected: expected as u64,
        found: found as u64,
    }
}

/// Returns the dimension sizes and the payload slice.
fn parse_header<'a>(path: &Path, bytes: &'a [u8], magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 4 {
        return Err(truncated(path, 0, 4, bytes.len()));
    }
    let found = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found,
            expected: magic,
        });
    }
    let ndims = (magic & 0xff) as usize;
    let header_len = 4 + 4 * ndims;
    if bytes.len() < header_len {
        return Err(truncated(path, 4, header_len - 4, bytes.len() - 4));
    }
    let dims: Vec<usize> = bytes[4..header_len]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let expected: usize = dims.iter().product();
    let payload = &bytes[header_len..];
    if payload.len() < expected {
        return Err(truncated(path, header_len, expected, payload.len()));
    }
    Ok((dims, &payload[..expected]))
}

/// Parse an IDX image buffer; `path` only labels errors.
pub fn read_idx_images(path: &Path, bytes: &[u8]) -> Result<Vec<ImageGrid>> {
    let (dims, payload) = parse_header(path, bytes, IDX_IMAGE_MAGIC)?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    if n == 0 {
        return Ok(Vec::new());
    }
    payload
        .chunks_exact(h * w)
        .take(n)
        .map(|px| ImageGrid::new(h, w, px.to_vec()))
        .collect()
}

pub fn read_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let (_, payload) = parse_header(path, bytes, IDX_LABEL_MAGIC)?;
    Ok(payload.to_vec())
}

/// Load an image file and its companion label file.
pub fn load_idx(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<(Vec<ImageGrid>, Vec<u8>)> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    let grids = read_idx_images(ip, &read_bytes(ip)?)?;
    let labels = read_idx_labels(lp, &read_bytes(lp)?)?;
    if grids.len() != labels.len() {
        return Err(Error::CountMismatch {
            images: grids.len(),
            labels: labels.len(),
        });
    }
    Ok((grids, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn image_file(n: u32, h: u32, w: u32, payload: &[u8]) -> Vec<u8> {
        let mut v = IDX_IMAGE_MAGIC.to_be_bytes().to_vec();
        for d in [n, h, w] {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v.extend_from_slice(payload);
        v
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut v = IDX_LABEL_MAGIC.to_be_bytes().to_vec();
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    #[test]
    fn ten_grids_from_header() {
        let payload: Vec<u8> = (0..7840u32).map(|i| (i % 256) as u8).collect();
        let grids = read_idx_images(Path::new("x"), &image_file(10, 28, 28, &payload)).unwrap();
        assert_eq!(grids.len(), 10);
        assert!(grids.iter().all(|g| g.height() == 28 && g.width() == 28));
        assert_eq!(grids[1].bytes()[0], (784 % 256) as u8);
        assert_eq!(grids[0].intensity(0, 3), 3.0 / 255.0);
    }

    #[test]
    fn labels_zero_to_nine() {
        let labels: Vec<u8> = (0..10).collect();
        assert_eq!(
            read_idx_labels(Path::new("x"), &label_file(&labels)).unwrap(),
            labels
        );
    }

    #[test]
    fn truncated_by_one_byte() {
        let payload = vec![0u8; 7839];
        let err = read_idx_images(Path::new("x"), &image_file(10, 28, 28, &payload)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Truncated {
                    expected: 7840,
                    found: 7839,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn bad_magic_is_reported() {
        let err = read_idx_labels(Path::new("x"), &image_file(1, 1, 1, &[0])).unwrap_err();
        assert!(matches!(
            err,
            Error::BadMagic {
                found: IDX_IMAGE_MAGIC,
                ..
            }
        ));
    }

    #[test]
    fn count_mismatch_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img.gz");
        let lp = dir.path().join("lab");
        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
        gz.write_all(&image_file(2, 1, 2, &[0, 255, 10, 20]))
            .unwrap();
        fs::write(&ip, gz.finish().unwrap()).unwrap();
        fs::write(&lp, label_file(&[3, 4, 5])).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp),
            Err(Error::CountMismatch {
                images: 2,
                labels: 3
            })
        ));
        fs::write(&lp, label_file(&[3, 4])).unwrap();
        let (g, l) = load_idx(&ip, &lp).unwrap();
        assert_eq!(g[0].intensity(0, 1), 1.0);
        assert_eq!(l, vec![3, 4]);
    }
}
