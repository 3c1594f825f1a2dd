//! Flat binary checkpoints.
//!
//! ```text
//! magic     4 bytes  "PLMM"
//! version   u32 LE   1
//! n_dims    u32 LE
//! dims      n_dims x u64 LE   (input, hidden..., classes)
//! params    f64 LE            per layer: weights (out x in, row-major), then biases
//! ```

use std::fs;
use std::path::Path;

use super::Mlp;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PLMM";
const VERSION: u32 = 1;

pub fn write_checkpoint(model: &Mlp) -> Vec<u8> {
    let dims = model.dims();
    let mut out = Vec::with_capacity(12 + 8 * dims.len() + 8 * model.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for p in model.params_flat() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Mlp> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 12 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dims_end = 12 + 8 * n;
    if bytes.len() < dims_end {
        return Err(bad("truncated dims"));
    }
    let dims: Vec<usize> = bytes[12..dims_end]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let mut model = Mlp::zeros(&dims).map_err(|e| bad(&e.to_string()))?;
    let payload = &bytes[dims_end..];
    if payload.len() != 8 * model.num_params() {
        return Err(bad(&format!(
            "expected {} parameter bytes, found {}",
            8 * model.num_params(),
            payload.len()
        )));
    }
    let params: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    model.set_params_flat(&params)?;
    Ok(model)
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &Mlp) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Mlp> {
    let path = path.as_ref();
    read_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
