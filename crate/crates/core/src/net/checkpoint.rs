//! Binary checkpoint: 16-byte magic, spec hash, layout, then the values as
//! little-endian f64.

use std::path::Path;

use super::params::ParamVector;
use super::spec::{NetSpec, ParamBlock};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 16] = b"GENSIM-CKPT-v01\n";

pub fn encode_checkpoint(spec: &NetSpec, params: &ParamVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&spec.hash().to_le_bytes());
    out.extend_from_slice(&(params.layout.len() as u32).to_le_bytes());
    for b in &params.layout {
        out.extend_from_slice(&(b.name.len() as u32).to_le_bytes());
        out.extend_from_slice(b.name.as_bytes());
        out.extend_from_slice(&(b.offset as u64).to_le_bytes());
        out.extend_from_slice(&(b.shape.len() as u32).to_le_bytes());
        for d in &b.shape {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
    }
    out.extend_from_slice(&(params.values.len() as u64).to_le_bytes());
    for v in &params.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflow".into()))
    }
}

/// Decodes and checks the checkpoint against `spec`.
pub fn decode_checkpoint(spec: &NetSpec, bytes: &[u8]) -> Result<ParamVector> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(16)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let hash = r.u64()?;
    if hash != spec.hash() {
        return Err(Error::Checkpoint(format!(
            "spec hash mismatch: file {hash:016x}, expected {:016x}",
            spec.hash()
        )));
    }
    let n_blocks = r.u32()? as usize;
    let mut layout = Vec::with_capacity(n_blocks.min(1024));
    for _ in 0..n_blocks {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?;
        let offset = r.usize()?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        layout.push(ParamBlock { name, offset, shape });
    }
    if layout != spec.layout() {
        return Err(Error::Checkpoint("layout does not match spec".into()));
    }
    let n = r.usize()?;
    if n != spec.param_count() {
        return Err(Error::Checkpoint(format!("expected {} values, found {n}", spec.param_count())));
    }
    let values = r
        .take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(ParamVector { values, layout })
}

pub fn save_checkpoint(path: impl AsRef<Path>, spec: &NetSpec, params: &ParamVector) -> Result<()> {
    let path = path.as_ref();
    // Write then rename so an interrupted save never clobbers a good file.
    let tmp = path.with_extension("ckpt.tmp");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&tmp, encode_checkpoint(spec, params)).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>, spec: &NetSpec) -> Result<ParamVector> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(spec, &bytes)
}
