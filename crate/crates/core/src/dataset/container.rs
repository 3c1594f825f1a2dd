//! Binary dataset container.
//!
//! ```text
//! magic    4 bytes   "PLMD"
//! version  u32 LE    1
//! N        u64 LE    sample count
//! C        u32 LE    classes
//! H, W     u32 LE    grid shape
//! N records, each:
//!   label bitmask  ceil(C/8) bytes, class c is bit (c % 8) of byte (c / 8)
//!   pixels         H*W bytes, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ImageGrid, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

pub const CONTAINER_MAGIC: &[u8; 4] = b"PLMD";
pub const CONTAINER_VERSION: u32 = 1;

pub fn write_dataset(path: impl AsRef<Path>, ds: &MultiLabelDataset) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let (h, wd) = ds.grid_shape();
    let c = ds.num_classes();
    w.write_all(CONTAINER_MAGIC).map_err(io)?;
    w.write_all(&CONTAINER_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(ds.len() as u64).to_le_bytes()).map_err(io)?;
    for v in [c, h, wd] {
        w.write_all(&(v as u32).to_le_bytes()).map_err(io)?;
    }
    let mut mask = vec![0u8; c.div_ceil(8)];
    for (grid, y) in ds.samples() {
        mask.fill(0);
        for (k, _) in y.iter().enumerate().filter(|(_, &v)| v == 1) {
            mask[k / 8] |= 1 << (k % 8);
        }
        w.write_all(&mask).map_err(io)?;
        w.write_all(grid.bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<MultiLabelDataset> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut header = [0u8; 28];
    r.read_exact(&mut header)
        .map_err(|_| Error::Container(format!("{}: truncated header", path.display())))?;
    if &header[0..4] != CONTAINER_MAGIC {
        return Err(Error::Container(format!("{}: bad magic", path.display())));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != CONTAINER_VERSION {
        return Err(Error::Container(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let c = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(header[20..24].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(header[24..28].try_into().unwrap()) as usize;

    let mask_len = c.div_ceil(8);
    let mut record = vec![0u8; mask_len + h * w];
    let mut grids = Vec::with_capacity(n);
    let mut labels = BinaryMatrix::zeros(n, c);
    for i in 0..n {
        r.read_exact(&mut record).map_err(|_| {
            Error::Container(format!(
                "{}: truncated at record {i} of {n}",
                path.display()
            ))
        })?;
        for k in 0..c {
            labels.set(i, k, record[k / 8] >> (k % 8) & 1 == 1);
        }
        grids.push(ImageGrid::new(h, w, record[mask_len..].to_vec())?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(Error::Container(format!(
            "{}: trailing bytes after {n} records",
            path.display()
        )));
    }
    MultiLabelDataset::new(grids, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip(classes in 1usize..20, dim in 1usize..16, rate in 0.0f64..1.0, seed in any::<u64>()) {
            let spec = SyntheticSpec::new(classes, dim, rate);
            let counts: Vec<usize> = (0..classes).map(|c| 1 + (c * 7) % 13).collect();
            let ds = generate_synthetic(&spec, &counts, seed).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("d.bin");
            write_dataset(&p, &ds).unwrap();
            prop_assert_eq!(read_dataset(&p).unwrap(), ds);
        }
    }

    #[test]
    fn truncation_and_magic_are_detected() {
        let spec = SyntheticSpec::new(3, 4, 0.0);
        let ds = generate_synthetic(&spec, &[2, 2, 2], 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        write_dataset(&p, &ds).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 28 + 6 * (1 + 4));

        std::fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_dataset(&p), Err(Error::Container(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(read_dataset(&p), Err(Error::Container(_))));
    }
}
