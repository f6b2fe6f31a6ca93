use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::idx::parse_idx;
use super::mstn::parse_mstn;
use super::transform::{from_band_major, resize_bilinear, to_band_major};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!("unknown split '{other}'"))),
        }
    }
}

/// Scenes sharing one `H×W×J` shape, stored band-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub split: Split,
    pub provenance: String,
    samples: Vec<Vec<f32>>,
}

impl Dataset {
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        split: Split,
        provenance: impl Into<String>,
        samples: Vec<Vec<f32>>,
    ) -> Result<Self> {
        let n = height * width * bands;
        for (i, s) in samples.iter().enumerate() {
            if s.len() != n {
                return Err(Error::shape(format!(
                    "sample {i} has {} values, expected {n}",
                    s.len()
                )));
            }
            if let Some(v) = s.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::config(format!(
                    "sample {i} has value {v} outside [0, 1]"
                )));
            }
        }
        Ok(Dataset {
            height,
            width,
            bands,
            split,
            provenance: provenance.into(),
            samples,
        })
    }

    /// `[count, H, W]` grayscale stack, as produced by the IDX reader.
    pub fn from_stack(
        stack: &Tensor<f32>,
        split: Split,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let (count, h, w, j) = match *stack.shape() {
            [c, h, w] => (c, h, w, 1),
            [c, h, w, j] => (c, h, w, j),
            ref s => {
                return Err(Error::shape(format!(
                    "expected [count,H,W(,J)] stack, got {s:?}"
                )))
            }
        };
        let per = h * w * j;
        let samples = (0..count)
            .map(|i| {
                let img = Tensor::new([h, w, j], stack.data()[i * per..(i + 1) * per].to_vec())?;
                to_band_major(&img)
            })
            .collect::<Result<_>>()?;
        Dataset::new(h, w, j, split, provenance, samples)
    }

    /// `[count, H, W, J]` stack normalized by its global maximum.
    pub fn from_mstn(
        stack: &Tensor<f32>,
        split: Split,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let max = stack.data().iter().fold(0f32, |m, &v| m.max(v));
        let scaled = if max > 0.0 {
            stack.map(|v| v / max)
        } else {
            stack.clone()
        };
        Dataset::from_stack(&scaled, split, provenance)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scene_len(&self) -> usize {
        self.height * self.width * self.bands
    }

    pub fn samples(&self) -> &[Vec<f32>] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.samples[i]
    }

    /// The first `n` samples (or all, if fewer).
    pub fn take(&self, n: usize) -> Dataset {
        Dataset {
            samples: self.samples.iter().take(n).cloned().collect(),
            provenance: format!("{} [first {n}]", self.provenance),
            ..*self
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn resized(&self, height: usize, width: usize) -> Result<Dataset> {
        if (height, width) == (self.height, self.width) {
            return Ok(self.clone());
        }
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let img = from_band_major(s, self.height, self.width, self.bands)?;
                let mut out = to_band_major(&resize_bilinear(&img, height, width)?)?;
                // bilinear weights can overshoot by an ulp
                out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Dataset::new(
            height,
            width,
            self.bands,
            self.split,
            format!("{} [bilinear {height}x{width}]", self.provenance),
            samples,
        )
    }

    /// Concatenates datasets of equal shape.
    pub fn concat(parts: Vec<Dataset>) -> Result<Dataset> {
        let mut it = parts.into_iter();
        let mut out = it
            .next()
            .ok_or_else(|| Error::config("nothing to concatenate"))?;
        for d in it {
            if (d.height, d.width, d.bands) != (out.height, out.width, out.bands) {
                return Err(Error::shape(format!(
                    "cannot join {}x{}x{} with {}x{}x{}",
                    out.height, out.width, out.bands, d.height, d.width, d.bands
                )));
            }
            out.provenance = format!("{} + {}", out.provenance, d.provenance);
            out.samples.extend(d.samples);
        }
        Ok(out)
    }
}

/// Reads an IDX or MSTN file, picked by its leading bytes.
pub fn load_file(path: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    if bytes.starts_with(b"MSTN") {
        Dataset::from_mstn(&parse_mstn(&bytes)?, split, name)
    } else {
        Dataset::from_stack(&parse_idx(&bytes)?, split, name)
    }
}

/// Plain-text `split path` lines; relative paths resolve against the
/// manifest's directory. Blank lines and `#` comments are ignored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(Split, PathBuf)>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (split, path) = line.split_once(char::is_whitespace).ok_or_else(|| {
                Error::config(format!("manifest line {}: expected 'split path'", n + 1))
            })?;
            let path = PathBuf::from(path.trim());
            let path = if path.is_absolute() {
                path
            } else {
                base.join(path)
            };
            entries.push((split.parse()?, path));
        }
        Ok(Manifest { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text: String = self
            .entries
            .iter()
            .map(|(s, p)| format!("{s} {}\n", p.display()))
            .collect();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// All files of one split joined in manifest order, or `None` if absent.
    pub fn load(&self, split: Split) -> Result<Option<Dataset>> {
        let parts = self
            .entries
            .iter()
            .filter(|(s, _)| *s == split)
            .map(|(_, p)| load_file(p, split))
            .collect::<Result<Vec<_>>>()?;
        if parts.is_empty() {
            Ok(None)
        } else {
            Dataset::concat(parts).map(Some)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range() {
        let err = Dataset::new(1, 2, 1, Split::Train, "t", vec![vec![0.5, 1.5]]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(Dataset::new(1, 2, 1, Split::Train, "t", vec![vec![0.5]]).is_err());
    }

    #[test]
    fn stack_is_converted_band_major() {
        let stack = Tensor::new([1, 1, 2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let d = Dataset::from_stack(&stack, Split::Test, "x").unwrap();
        assert_eq!(d.sample(0), &[0.1, 0.3, 0.2, 0.4]);
    }

    #[test]
    fn mstn_normalized_by_max() {
        let stack = Tensor::new([1, 1, 2, 1], vec![2.0, 4.0]).unwrap();
        let d = Dataset::from_mstn(&stack, Split::Train, "x").unwrap();
        assert_eq!(d.sample(0), &[0.5, 1.0]);
    }

    #[test]
    fn manifest_parsing() {
        let m = Manifest::parse(
            "# data\ntrain a.idx\n\ntest /abs/b.mstn\n",
            Path::new("/root"),
        )
        .unwrap();
        assert_eq!(m.entries[0], (Split::Train, PathBuf::from("/root/a.idx")));
        assert_eq!(m.entries[1], (Split::Test, PathBuf::from("/abs/b.mstn")));
        assert!(Manifest::parse("holdout x", Path::new(".")).is_err());
    }
}
