//! Big-endian IDX containers (the MNIST family), unsigned-byte payloads only.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

const TYPE_U8: u8 = 0x08;

/// Parses an IDX byte stream into a tensor scaled to `[0, 1]`.
pub fn parse_idx(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len(), "IDX header needs 4 bytes"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::format(0, "IDX magic must start with 0x00 0x00"));
    }
    if bytes[2] != TYPE_U8 {
        return Err(Error::format(
            2,
            format!("unsupported IDX element type 0x{:02x}", bytes[2]),
        ));
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(Error::format(3, "IDX file declares zero dimensions"));
    }
    let mut dims = Vec::with_capacity(ndims);
    for d in 0..ndims {
        let at = 4 + 4 * d;
        let b = bytes
            .get(at..at + 4)
            .ok_or_else(|| Error::format(bytes.len(), format!("truncated IDX dimension {d}")))?;
        dims.push(u32::from_be_bytes(b.try_into().unwrap()) as usize);
    }
    let start = 4 + 4 * ndims;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(4, "IDX dimensions overflow"))?;
    let payload = &bytes[start..];
    if payload.len() < count {
        return Err(Error::format(
            bytes.len(),
            format!(
                "IDX payload has {} bytes, dimensions imply {count}",
                payload.len()
            ),
        ));
    }
    if payload.len() > count {
        return Err(Error::format(
            start + count,
            "trailing bytes after IDX payload",
        ));
    }
    let data = payload.iter().map(|&b| b as f32 / 255.0).collect();
    Tensor::new(dims, data)
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes)
}

pub fn encode_idx(dims: &[usize], payload: &[u8]) -> Result<Vec<u8>> {
    if dims.is_empty() || dims.len() > 255 {
        return Err(Error::shape("IDX needs 1..=255 dimensions"));
    }
    if dims.iter().product::<usize>() != payload.len() {
        return Err(Error::shape(format!(
            "dims {dims:?} do not match {} payload bytes",
            payload.len()
        )));
    }
    let mut out = vec![0, 0, TYPE_U8, dims.len() as u8];
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::shape("IDX dimension exceeds u32"))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn write_idx(path: impl AsRef<Path>, dims: &[usize], payload: &[u8]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_idx(dims, payload)?).map_err(|e| Error::io(path, e))
}
