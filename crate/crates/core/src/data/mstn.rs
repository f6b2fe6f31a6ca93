//! `MSTN` raw multispectral stacks: `[count, H, W, J]` little-endian f32.
//!
//! ```text
//! "MSTN" | u32 version | u32 count | u32 H | u32 W | u32 J | u32 dtype (0 = f32) | payload
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"MSTN";
pub const MSTN_VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

pub fn encode_mstn(stack: &Tensor<f32>) -> Result<Vec<u8>> {
    let [count, h, w, j] = <[usize; 4]>::try_from(stack.shape()).map_err(|_| {
        Error::shape(format!(
            "MSTN stack must be [count,H,W,J], got {:?}",
            stack.shape()
        ))
    })?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * stack.len());
    out.extend_from_slice(MAGIC);
    for v in [MSTN_VERSION, count as u32, h as u32, w as u32, j as u32, 0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in stack.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn parse_mstn(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len(), "truncated MSTN header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected MSTN"));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    if field(0) != MSTN_VERSION {
        return Err(Error::format(
            4,
            format!("unsupported MSTN version {}", field(0)),
        ));
    }
    if field(5) != 0 {
        return Err(Error::format(
            24,
            format!("unsupported MSTN dtype code {}", field(5)),
        ));
    }
    let dims: Vec<usize> = (1..5).map(|i| field(i) as usize).collect();
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(8, "MSTN dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n {
        return Err(Error::format(
            HEADER_LEN + payload.len().min(n),
            format!(
                "MSTN payload has {} bytes, header implies {n}",
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(dims, data)
}

pub fn read_mstn(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_mstn(&bytes)
}

pub fn write_mstn(stack: &Tensor<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_mstn(stack)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_stack_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f32> = (0..2 * 4 * 4 * 8).map(|_| rng.gen()).collect();
        let t = Tensor::new([2, 4, 4, 8], data).unwrap();
        let back = parse_mstn(&encode_mstn(&t).unwrap()).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert!(back
            .data()
            .iter()
            .zip(t.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn empty_stack_is_valid() {
        let t = Tensor::new([0, 4, 4, 8], vec![]).unwrap();
        let back = parse_mstn(&encode_mstn(&t).unwrap()).unwrap();
        assert_eq!(back.shape(), &[0, 4, 4, 8]);
    }

    #[test]
    fn oversized_header_is_rejected() {
        let t = Tensor::new([1, 2, 2, 1], vec![0.0; 4]).unwrap();
        let mut bytes = encode_mstn(&t).unwrap();
        bytes[8] = 2;
        assert!(matches!(parse_mstn(&bytes), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_magic_version_dtype() {
        let t = Tensor::new([1, 1, 1, 1], vec![0.5]).unwrap();
        let good = encode_mstn(&t).unwrap();
        for (at, off) in [(0usize, 0usize), (4, 4), (24, 24)] {
            let mut b = good.clone();
            b[at] ^= 0x7f;
            assert!(matches!(parse_mstn(&b), Err(Error::Format { offset, .. }) if offset == off));
        }
    }
}
