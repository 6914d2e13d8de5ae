//! Binary named-tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      b"STPM"
//! version    u32
//! manifest   u64 length + UTF-8 JSON bytes
//! count      u64
//! repeated:  u32 name length, name bytes,
//!            u32 rank, rank × u64 dims,
//!            product(dims) × f64 values (row-major)
//! ```
//!
//! Parameters are written in registration order, so equal parameter sets
//! produce identical bytes.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{AutodiffError, Result};
use crate::params::ParamSet;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"STPM";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_params<W: Write>(mut out: W, params: &ParamSet, manifest: &serde_json::Value) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let manifest = serde_json::to_vec(manifest).map_err(|e| AutodiffError::Format(e.to_string()))?;
    out.write_all(&(manifest.len() as u64).to_le_bytes())?;
    out.write_all(&manifest)?;
    out.write_all(&(params.len() as u64).to_le_bytes())?;
    for (_, name, tensor) in params.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for d in tensor.shape() {
            out.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in tensor.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_params<R: Read>(mut input: R) -> Result<(ParamSet, serde_json::Value)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AutodiffError::Format("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != FORMAT_VERSION {
        return Err(AutodiffError::Format(format!("unsupported version {version}")));
    }
    let len = read_u64(&mut input)? as usize;
    let mut manifest = vec![0u8; len];
    input.read_exact(&mut manifest)?;
    let manifest = serde_json::from_slice(&manifest).map_err(|e| AutodiffError::Format(e.to_string()))?;
    let count = read_u64(&mut input)?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = read_u32(&mut input)? as usize;
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| AutodiffError::Format(e.to_string()))?;
        let rank = read_u32(&mut input)? as usize;
        let shape = (0..rank)
            .map(|_| read_u64(&mut input).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        params.add(name, Tensor::new(shape, data)?)?;
    }
    Ok((params, manifest))
}

pub fn save_params(path: impl AsRef<Path>, params: &ParamSet, manifest: &serde_json::Value) -> Result<()> {
    let mut bytes = Vec::with_capacity(params.num_values() * 8 + 1024);
    write_params(&mut bytes, params, manifest)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<(ParamSet, serde_json::Value)> {
    let bytes = std::fs::read(path)?;
    read_params(bytes.as_slice())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
