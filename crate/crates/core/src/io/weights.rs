//! Binary weights container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic  b"TCNW"
//! u32    format version (currently 1)
//! u32    tensor count
//! per tensor:
//!   u32      name length, then that many UTF-8 bytes
//!   u32      rank
//!   u32 * rank   dimensions
//!   f32 * prod(dims)   row-major values
//! ```

use super::IoError;
use crate::model::{ModelConfig, ModelWeights, Tensor};
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"TCNW";
const VERSION: u32 = 1;

pub fn save_weights(path: &Path, weights: &ModelWeights) -> Result<(), IoError> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(weights.tensors.len() as u32).to_le_bytes());
    for t in &weights.tensors {
        bytes.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        bytes.extend_from_slice(t.name.as_bytes());
        bytes.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            bytes.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IoError> {
        if self.pos + n > self.bytes.len() {
            return Err(IoError::MalformedContainer(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_weights(path: &Path) -> Result<ModelWeights, IoError> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(IoError::MalformedContainer("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(IoError::MalformedContainer(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| IoError::MalformedContainer("tensor name is not UTF-8".into()))?;
        if tensors.iter().any(|t: &Tensor| t.name == name) {
            return Err(IoError::MalformedContainer(format!("duplicate tensor name {name}")));
        }
        let rank = r.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let numel: usize = dims.iter().product();
        let raw = r.take(numel * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        tensors.push(Tensor { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(IoError::MalformedContainer(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(ModelWeights { tensors })
}

/// Load and validate against a config; shape or name mismatches are
/// reported as [`IoError::WeightsConfigMismatch`].
pub fn load_weights_checked(path: &Path, config: &ModelConfig) -> Result<ModelWeights, IoError> {
    let weights = load_weights(path)?;
    weights.validate_against(config)?;
    Ok(weights)
}
