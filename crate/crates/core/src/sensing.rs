//! Single-pixel camera sensing with optimizable coded apertures.
//!
//! Each of the `K` snapshots integrates the scene against one aperture
//! pattern. Multispectral scenes reuse the same patterns for every band, so
//! the full operator is block diagonal with one identical block per band.
//! Scenes are flattened band-major: band `j` occupies `x[j·MN .. (j+1)·MN]`.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, HasParams, Parameter, Real, Tape, Tensor, Var};

/// Scene and acquisition dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingShape {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub snapshots: usize,
    pub ratio: f64,
}

impl SensingShape {
    /// `K = round(ratio·M·N)`, at least one snapshot.
    pub fn new(ratio: f64, height: usize, width: usize, bands: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::config(format!(
                "compression ratio must lie in (0, 1], got {ratio}"
            )));
        }
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::config("image dims and band count must be >= 1"));
        }
        let snapshots = ((ratio * (height * width) as f64).round() as usize).max(1);
        Ok(SensingShape {
            height,
            width,
            bands,
            snapshots,
            ratio,
        })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Length of a flattened scene, `M·N·J`.
    pub fn scene_len(&self) -> usize {
        self.pixels() * self.bands
    }

    /// Length of a measurement vector, `K·J`.
    pub fn measurement_len(&self) -> usize {
        self.snapshots * self.bands
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureMode {
    /// Realized patterns are `sign(latent)` in `{−1, +1}`.
    Binary,
    /// Realized patterns equal the latent values.
    RealValued,
}

impl ApertureMode {
    fn code(self) -> u8 {
        match self {
            ApertureMode::Binary => 0,
            ApertureMode::RealValued => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ApertureMode::Binary),
            1 => Some(ApertureMode::RealValued),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    AdditiveWhiteGaussian,
}

/// Measurement noise model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec::default()
    }

    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::AdditiveWhiteGaussian,
            snr_db,
            seed,
        }
    }

    /// Noise realization for `clean`, or `None` for noiseless sensing.
    /// `stream` selects an independent draw (e.g. per sample and epoch).
    pub fn sample<T: Real>(&self, clean: &[T], stream: u64) -> Option<Vec<T>> {
        match self.kind {
            NoiseKind::None => None,
            NoiseKind::AdditiveWhiteGaussian => {
                let n = clean.len().max(1) as f64;
                let power = clean.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / n;
                let sigma = (power / 10f64.powf(self.snr_db / 10.0)).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(
                    self.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                );
                Some(
                    clean
                        .iter()
                        .map(|_| T::of(sigma * rng.sample::<f64, _>(StandardNormal)))
                        .collect(),
                )
            }
        }
    }
}

/// The `K` aperture patterns of one single-pixel camera.
#[derive(Clone, Debug)]
pub struct CodedApertureBank<T: Real> {
    /// Latent patterns, shape `[K, M·N]`.
    pub latent: Parameter<T>,
    pub mode: ApertureMode,
    pub shape: SensingShape,
    pub seed: u64,
}

/// Builds a bank with latent patterns drawn uniformly from `[−1, 1]`.
pub fn build_sensing<T: Real>(
    ratio: f64,
    height: usize,
    width: usize,
    bands: usize,
    mode: ApertureMode,
    seed: u64,
) -> Result<CodedApertureBank<T>> {
    let shape = SensingShape::new(ratio, height, width, bands)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.snapshots * shape.pixels();
    let data = (0..n).map(|_| T::of(rng.gen_range(-1.0..=1.0))).collect();
    let latent = Tensor::new([shape.snapshots, shape.pixels()], data)?;
    Ok(CodedApertureBank {
        latent: Parameter::new("ca.latent", latent),
        mode,
        shape,
        seed,
    })
}

impl<T: Real> CodedApertureBank<T> {
    /// Wraps explicit latent patterns of shape `[K, M·N]`.
    pub fn from_latent(shape: SensingShape, mode: ApertureMode, latent: Tensor<T>) -> Result<Self> {
        if latent.shape() != [shape.snapshots, shape.pixels()] {
            return Err(Error::shape(format!(
                "latent apertures must be [{}, {}], got {:?}",
                shape.snapshots,
                shape.pixels(),
                latent.shape()
            )));
        }
        Ok(CodedApertureBank {
            latent: Parameter::new("ca.latent", latent),
            mode,
            shape,
            seed: 0,
        })
    }

    /// The sensing matrix actually applied to the scene.
    pub fn realized(&self) -> Tensor<T> {
        match self.mode {
            ApertureMode::Binary => self.latent.value.map(numerics::binary_sign),
            ApertureMode::RealValued => self.latent.value.clone(),
        }
    }

    /// Records the realized matrix; binary banks route through the STE.
    pub fn record(&self, tape: &mut Tape<T>) -> Result<Var> {
        let latent = tape.param(&self.latent)?;
        match self.mode {
            ApertureMode::Binary => tape.binarize_ste(latent),
            ApertureMode::RealValued => Ok(latent),
        }
    }

    fn check_len(&self, len: usize, want: usize, what: &str) -> Result<()> {
        if len != want {
            return Err(Error::shape(format!(
                "{what}: expected length {want}, got {len}"
            )));
        }
        Ok(())
    }

    /// `y_j = H·x_j + ω_j` for every band, on the tape.
    pub fn spc_forward(
        &self,
        tape: &mut Tape<T>,
        h: Var,
        x: Var,
        noise: &NoiseSpec,
        stream: u64,
    ) -> Result<Var> {
        self.check_len(tape.value(x).len(), self.shape.scene_len(), "spc_forward")?;
        let y = tape.band_matvec(h, x, false, T::one())?;
        match noise.sample(tape.value(y).data(), stream) {
            None => Ok(y),
            Some(w) => {
                let w = tape.constant(Tensor::vector(w))?;
                tape.add(y, w)
            }
        }
    }

    /// `x⁰_j = (1/K)·Hᵀ·y_j` for every band, on the tape.
    pub fn reproject(&self, tape: &mut Tape<T>, h: Var, y: Var) -> Result<Var> {
        self.check_len(
            tape.value(y).len(),
            self.shape.measurement_len(),
            "reproject",
        )?;
        tape.band_matvec(h, y, true, self.adjoint_scale())
    }

    /// Normalization `1/K` applied to every adjoint of the sensing matrix.
    pub fn adjoint_scale(&self) -> T {
        T::one() / T::of(self.shape.snapshots as f64)
    }

    /// Tape-free measurement of a flattened scene.
    pub fn measure(&self, x: &[T], noise: &NoiseSpec, stream: u64) -> Result<Vec<T>> {
        self.check_len(x.len(), self.shape.scene_len(), "measure")?;
        let h = self.realized();
        let mut y = numerics::band_matvec(
            h.data(),
            self.shape.snapshots,
            self.shape.pixels(),
            x,
            false,
            T::one(),
        )?;
        if let Some(w) = noise.sample(&y, stream) {
            y.iter_mut().zip(w).for_each(|(a, b)| *a = *a + b);
        }
        Ok(y)
    }

    /// Tape-free `(1/K)·Hᵀ·y`.
    pub fn reproject_values(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_len(y.len(), self.shape.measurement_len(), "reproject")?;
        let h = self.realized();
        numerics::band_matvec(
            h.data(),
            self.shape.snapshots,
            self.shape.pixels(),
            y,
            true,
            self.adjoint_scale(),
        )
    }

    /// Writes the realized apertures in the `SPCA` container.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = ApertureFile {
            mode: self.mode,
            snapshots: self.shape.snapshots,
            height: self.shape.height,
            width: self.shape.width,
            values: self
                .realized()
                .data()
                .iter()
                .map(|v| v.as_f64() as f32)
                .collect(),
        };
        file.write(path)
    }
}

impl<T: Real> HasParams<T> for CodedApertureBank<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![&self.latent]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![&mut self.latent]
    }
}

const CA_MAGIC: &[u8; 4] = b"SPCA";
const CA_VERSION: u32 = 1;
const CA_HEADER_LEN: usize = 4 + 4 * 4 + 1;

/// Realized apertures as stored on disk: little-endian, header
/// `SPCA | u32 version | u32 K | u32 M | u32 N | u8 mode`, then `K·M·N` f32.
#[derive(Clone, Debug, PartialEq)]
pub struct ApertureFile {
    pub mode: ApertureMode,
    pub snapshots: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

impl ApertureFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CA_HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(CA_MAGIC);
        for v in [
            CA_VERSION,
            self.snapshots as u32,
            self.height as u32,
            self.width as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.mode.code());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < CA_HEADER_LEN {
            return Err(Error::format(bytes.len(), "truncated SPCA header"));
        }
        if &bytes[..4] != CA_MAGIC {
            return Err(Error::format(0, "bad magic, expected SPCA"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if word(0) != CA_VERSION {
            return Err(Error::format(
                4,
                format!("unsupported SPCA version {}", word(0)),
            ));
        }
        let (k, m, n) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let mode = ApertureMode::from_code(bytes[20])
            .ok_or_else(|| Error::format(20, format!("unknown mode byte {}", bytes[20])))?;
        let count = k * m * n;
        let payload = &bytes[CA_HEADER_LEN..];
        if payload.len() != 4 * count {
            return Err(Error::format(
                CA_HEADER_LEN + payload.len().min(4 * count),
                format!(
                    "payload holds {} bytes, header implies {}",
                    payload.len(),
                    4 * count
                ),
            ));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ApertureFile {
            mode,
            snapshots: k,
            height: m,
            width: n,
            values,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hadamard2() -> CodedApertureBank<f64> {
        let shape = SensingShape::new(1.0, 1, 2, 1).unwrap();
        let h = Tensor::new([2, 2], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        CodedApertureBank::from_latent(shape, ApertureMode::RealValued, h).unwrap()
    }

    #[test]
    fn snapshot_counts() {
        assert_eq!(SensingShape::new(0.1, 32, 32, 1).unwrap().snapshots, 102);
        assert_eq!(SensingShape::new(1.0, 32, 32, 1).unwrap().snapshots, 1024);
        assert_eq!(SensingShape::new(0.8, 32, 32, 1).unwrap().snapshots, 819);
        assert_eq!(SensingShape::new(1e-6, 4, 4, 1).unwrap().snapshots, 1);
    }

    #[test]
    fn ratio_outside_unit_interval_is_config_error() {
        for r in [0.0, -0.5, 1.01, f64::NAN] {
            assert!(matches!(
                SensingShape::new(r, 8, 8, 1),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn binary_realization_is_plus_minus_one() {
        let mut bank = build_sensing::<f32>(0.5, 4, 4, 1, ApertureMode::Binary, 3).unwrap();
        bank.latent.value.data_mut()[0] = 0.0;
        let h = bank.realized();
        assert!(h.data().iter().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(h.data()[0], 1.0);
    }

    #[test]
    fn latent_init_is_uniform_in_unit_box_and_seeded() {
        let a = build_sensing::<f64>(0.5, 8, 8, 1, ApertureMode::RealValued, 9).unwrap();
        let b = build_sensing::<f64>(0.5, 8, 8, 1, ApertureMode::RealValued, 9).unwrap();
        assert_eq!(a.latent.value, b.latent.value);
        assert!(a
            .latent
            .value
            .data()
            .iter()
            .all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(a.realized(), a.latent.value);
    }

    #[test]
    fn forward_and_reproject_hadamard() {
        let bank = hadamard2();
        let y = bank.measure(&[1.0, 2.0], &NoiseSpec::none(), 0).unwrap();
        assert_eq!(y, vec![3.0, -1.0]);
        assert_eq!(bank.reproject_values(&y).unwrap(), vec![1.0, 2.0]);
        assert_eq!(
            bank.measure(&[0.0, 0.0], &NoiseSpec::none(), 0).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(bank.reproject_values(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_row_adjoint() {
        let shape = SensingShape::new(0.5, 1, 2, 1).unwrap();
        let h = Tensor::new([1, 2], vec![1.0, 1.0]).unwrap();
        let bank = CodedApertureBank::from_latent(shape, ApertureMode::RealValued, h).unwrap();
        assert_eq!(bank.reproject_values(&[3.0]).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn bands_are_sensed_independently() {
        let shape = SensingShape::new(1.0, 1, 2, 2).unwrap();
        let h = Tensor::new([2, 2], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let bank = CodedApertureBank::from_latent(shape, ApertureMode::RealValued, h).unwrap();
        let y = bank
            .measure(&[1.0, 2.0, 5.0, -1.0], &NoiseSpec::none(), 0)
            .unwrap();
        assert_eq!(y, vec![3.0, -1.0, 4.0, 6.0]);
        let swapped = bank
            .measure(&[5.0, -1.0, 1.0, 2.0], &NoiseSpec::none(), 0)
            .unwrap();
        assert_eq!(swapped, vec![4.0, 6.0, 3.0, -1.0]);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let bank = hadamard2();
        assert!(matches!(
            bank.measure(&[1.0], &NoiseSpec::none(), 0),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            bank.reproject_values(&[1.0; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn awgn_hits_target_snr() {
        let clean: Vec<f64> = (0..20_000)
            .map(|i| ((i as f64) * 0.013).sin() + 0.3)
            .collect();
        for snr in [0.0, 10.0, 25.0] {
            let w = NoiseSpec::awgn(snr, 4).sample(&clean, 1).unwrap();
            let ps: f64 = clean.iter().map(|v| v * v).sum();
            let pn: f64 = w.iter().map(|v| v * v).sum();
            let measured = 10.0 * (ps / pn).log10();
            assert!((measured - snr).abs() <= 0.5, "{measured} vs {snr}");
        }
    }

    #[test]
    fn noise_is_reproducible() {
        let bank = build_sensing::<f64>(0.5, 4, 4, 1, ApertureMode::Binary, 1).unwrap();
        let x: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        let none = NoiseSpec::none();
        assert_eq!(
            bank.measure(&x, &none, 0).unwrap(),
            bank.measure(&x, &none, 0).unwrap()
        );
        let awgn = NoiseSpec::awgn(20.0, 5);
        assert_eq!(
            bank.measure(&x, &awgn, 3).unwrap(),
            bank.measure(&x, &awgn, 3).unwrap()
        );
        assert_ne!(
            bank.measure(&x, &awgn, 3).unwrap(),
            bank.measure(&x, &awgn, 4).unwrap()
        );
    }

    #[test]
    fn aperture_file_rejects_corruption() {
        let bank = build_sensing::<f32>(0.25, 4, 4, 1, ApertureMode::Binary, 2).unwrap();
        let file = ApertureFile {
            mode: bank.mode,
            snapshots: 4,
            height: 4,
            width: 4,
            values: bank.realized().into_data(),
        };
        let bytes = file.to_bytes();
        assert_eq!(ApertureFile::from_bytes(&bytes).unwrap(), file);
        assert!(ApertureFile::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            ApertureFile::from_bytes(&bad),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bad_mode = bytes;
        bad_mode[20] = 7;
        assert!(ApertureFile::from_bytes(&bad_mode).is_err());
    }
}
