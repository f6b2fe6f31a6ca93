//! `SPKD` checkpoint container.
//!
//! Layout (little-endian):
//!
//! ```text
//! "SPKD" | u32 version | u32 header_len | header (UTF-8 JSON)
//!        | f32 payload, tensors in manifest order
//!        | u32 trailer_len | trailer (UTF-8 JSON metric history)
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Role, TrainConfig, TrainHistory};
use crate::error::{Error, Result};
use crate::numerics::{HasParams, Tensor};
use crate::system::{ImagingSystem, SystemConfig};

const MAGIC: &[u8; 4] = b"SPKD";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the payload, in f32 elements.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    system: SystemConfig,
    role: Option<Role>,
    teacher_ratio: Option<f64>,
    train: Option<TrainConfig>,
    epoch: usize,
    tensors: Vec<TensorEntry>,
}

/// Trained weights of one imaging system plus provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub system: SystemConfig,
    pub role: Option<Role>,
    /// Compression ratio of the teacher a student was distilled from.
    pub teacher_ratio: Option<f64>,
    pub train: Option<TrainConfig>,
    pub epoch: usize,
    pub history: TrainHistory,
    /// `(name, tensor)` in the system's parameter order.
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn from_system(system: &ImagingSystem<f32>) -> Self {
        Checkpoint {
            system: system.config.clone(),
            role: None,
            teacher_ratio: None,
            train: None,
            epoch: 0,
            history: TrainHistory::default(),
            tensors: system
                .params()
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    /// Rebuilds the system, checking every stored tensor against the
    /// architecture the header declares.
    pub fn to_system(&self) -> Result<ImagingSystem<f32>> {
        let mut sys = ImagingSystem::<f32>::new(self.system.clone())
            .map_err(|e| Error::format(0, format!("checkpoint declares an invalid system: {e}")))?;
        let params = sys.params_mut();
        if params.len() != self.tensors.len() {
            return Err(Error::format(
                0,
                format!(
                    "checkpoint holds {} tensors, architecture has {}",
                    self.tensors.len(),
                    params.len()
                ),
            ));
        }
        for (p, (name, t)) in params.into_iter().zip(&self.tensors) {
            if &p.name != name {
                return Err(Error::format(
                    0,
                    format!("tensor '{name}' found where '{}' was expected", p.name),
                ));
            }
            if p.value.shape() != t.shape() {
                return Err(Error::format(
                    0,
                    format!(
                        "tensor '{name}' has shape {:?}, architecture expects {:?}",
                        t.shape(),
                        p.value.shape()
                    ),
                ));
            }
            p.value = t.clone();
        }
        Ok(sys)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let entries: Vec<TensorEntry> = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let e = TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                    offset,
                };
                offset += t.len();
                e
            })
            .collect();
        let header = serde_json::to_vec(&Header {
            system: self.system.clone(),
            role: self.role,
            teacher_ratio: self.teacher_ratio,
            train: self.train.clone(),
            epoch: self.epoch,
            tensors: entries,
        })?;
        let trailer = serde_json::to_vec(&self.history)?;

        let mut out = Vec::with_capacity(16 + header.len() + 4 * offset + trailer.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&(trailer.len() as u32).to_le_bytes());
        out.extend_from_slice(&trailer);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let read_u32 = |at: usize| -> Result<u32> {
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| Error::format(at, "unexpected end of checkpoint"))
        };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::format(0, "bad magic, expected SPKD"));
        }
        let version = read_u32(4)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(
                4,
                format!("unsupported checkpoint version {version}"),
            ));
        }
        let header_len = read_u32(8)? as usize;
        let header_bytes = bytes
            .get(12..12 + header_len)
            .ok_or_else(|| Error::format(12, "truncated checkpoint header"))?;
        let header: Header = serde_json::from_slice(header_bytes)
            .map_err(|e| Error::format(12, format!("malformed header: {e}")))?;

        let payload_start = 12 + header_len;
        let mut expected = 0usize;
        for e in &header.tensors {
            if e.offset != expected {
                return Err(Error::format(
                    payload_start,
                    format!("tensor '{}' has non-contiguous offset {}", e.name, e.offset),
                ));
            }
            expected += e.shape.iter().product::<usize>();
        }
        let payload_end = payload_start + 4 * expected;
        let payload = bytes
            .get(payload_start..payload_end)
            .ok_or_else(|| Error::format(bytes.len(), "checkpoint payload truncated"))?;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in &header.tensors {
            let n: usize = e.shape.iter().product();
            let data = payload[4 * e.offset..4 * (e.offset + n)]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push((e.name.clone(), Tensor::new(e.shape.clone(), data)?));
        }

        let trailer_len = read_u32(payload_end)? as usize;
        let trailer_start = payload_end + 4;
        let trailer = bytes
            .get(trailer_start..trailer_start + trailer_len)
            .ok_or_else(|| Error::format(trailer_start, "truncated metric trailer"))?;
        if trailer_start + trailer_len != bytes.len() {
            return Err(Error::format(
                trailer_start + trailer_len,
                "trailing bytes after checkpoint",
            ));
        }
        let history: TrainHistory = serde_json::from_slice(trailer)
            .map_err(|e| Error::format(trailer_start, format!("malformed metric trailer: {e}")))?;

        let ckpt = Checkpoint {
            system: header.system,
            role: header.role,
            teacher_ratio: header.teacher_ratio,
            train: header.train,
            epoch: header.epoch,
            history,
            tensors,
        };
        // reject manifests that do not fit the declared architecture
        ckpt.to_system()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{ApertureMode, NoiseSpec};
    use crate::system::system_config;

    fn tiny() -> ImagingSystem<f32> {
        ImagingSystem::new(system_config(0.5, ApertureMode::Binary, 8, 2, 4)).unwrap()
    }

    #[test]
    fn roundtrip_preserves_forward_bits() {
        let sys = tiny();
        let scene: Vec<f32> = (0..64).map(|i| (i as f32 * 0.1).sin().abs()).collect();
        let mut ck = Checkpoint::from_system(&sys);
        ck.history.step_losses = vec![0.5, 0.25];
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        let sys2 = back.to_system().unwrap();
        let a = sys.reconstruct(&scene, &NoiseSpec::none(), 0).unwrap();
        let b = sys2.reconstruct(&scene, &NoiseSpec::none(), 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(sys.bank.realized(), sys2.bank.realized());
    }

    #[test]
    fn truncation_is_format_error() {
        let bytes = Checkpoint::from_system(&tiny()).to_bytes().unwrap();
        for cut in [0, 3, 10, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(
                    Checkpoint::from_bytes(&bytes[..cut]),
                    Err(Error::Format { .. })
                ),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn wrong_magic_and_version() {
        let mut bytes = Checkpoint::from_system(&tiny()).to_bytes().unwrap();
        bytes[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Format { offset: 4, .. })
        ));
        bytes[0] = b'Q';
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn mismatched_shape_names_the_tensor() {
        let mut ck = Checkpoint::from_system(&tiny());
        ck.tensors[5].1 = Tensor::zeros([2, 2]);
        let name = ck.tensors[5].0.clone();
        let bytes = ck.to_bytes().unwrap();
        let err = Checkpoint::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains(&name), "{err}");
    }
}
