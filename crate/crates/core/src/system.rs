//! A complete camera: coded-aperture encoder plus unrolled decoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{HasParams, Parameter, Real, Tape, Tensor};
use crate::recovery::{unrolled_forward, ProxConfig, ReconstructionTrace, RecoveryNet, TraceVars};
use crate::sensing::{build_sensing, ApertureMode, CodedApertureBank, NoiseSpec, SensingShape};

/// Architecture and initialization of one imaging system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Compression ratio `γ = K / (M·N)`.
    pub ratio: f64,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub stages: usize,
    pub prox: ProxConfig,
    pub mode: ApertureMode,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            ratio: 0.8,
            height: 32,
            width: 32,
            bands: 1,
            stages: crate::recovery::DEFAULT_STAGES,
            prox: ProxConfig::default(),
            mode: ApertureMode::Binary,
            seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn shape(&self) -> Result<SensingShape> {
        SensingShape::new(self.ratio, self.height, self.width, self.bands)
    }
}

#[derive(Clone, Debug)]
pub struct ImagingSystem<T: Real> {
    pub config: SystemConfig,
    pub bank: CodedApertureBank<T>,
    pub net: RecoveryNet<T>,
}

impl<T: Real> ImagingSystem<T> {
    pub fn new(config: SystemConfig) -> Result<Self> {
        let bank = build_sensing(
            config.ratio,
            config.height,
            config.width,
            config.bands,
            config.mode,
            config.seed,
        )?;
        let net = RecoveryNet::new(
            bank.shape,
            config.stages,
            config.prox,
            config.seed.wrapping_add(1),
        )?;
        Ok(ImagingSystem { config, bank, net })
    }

    pub fn shape(&self) -> SensingShape {
        self.bank.shape
    }

    /// Senses `scene` and runs the unrolled network on the tape.
    pub fn record(
        &self,
        tape: &mut Tape<T>,
        scene: &[T],
        noise: &NoiseSpec,
        stream: u64,
    ) -> Result<TraceVars> {
        if scene.len() != self.shape().scene_len() {
            return Err(Error::shape(format!(
                "scene has {} values, system expects {}",
                scene.len(),
                self.shape().scene_len()
            )));
        }
        let h = self.bank.record(tape)?;
        let x = tape.constant(Tensor::vector(scene.to_vec()))?;
        let y = self.bank.spc_forward(tape, h, x, noise, stream)?;
        unrolled_forward(tape, &self.net, &self.bank, h, y)
    }

    /// Gradient-free reconstruction using the realized apertures.
    pub fn reconstruct(
        &self,
        scene: &[T],
        noise: &NoiseSpec,
        stream: u64,
    ) -> Result<ReconstructionTrace<T>> {
        let mut tape = Tape::inference();
        let trace = self.record(&mut tape, scene, noise, stream)?;
        Ok(trace.collect(&tape))
    }

    /// Same weights in another element type.
    pub fn cast<U: Real>(&self) -> ImagingSystem<U> {
        let mut out =
            ImagingSystem::<U>::new(self.config.clone()).expect("config already validated");
        out.bank.mode = self.bank.mode;
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            *dst = src.cast();
        }
        out
    }

    pub fn freeze(&mut self) {
        self.set_requires_grad(false);
    }

    pub fn mode(&self) -> ApertureMode {
        self.bank.mode
    }
}

impl<T: Real> HasParams<T> for ImagingSystem<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        let mut v = self.bank.params();
        v.extend(self.net.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut v = self.bank.params_mut();
        v.extend(self.net.params_mut());
        v
    }
}

/// Shorthand for a system with a given mode and ratio.
pub fn system_config(
    ratio: f64,
    mode: ApertureMode,
    size: usize,
    stages: usize,
    channels: usize,
) -> SystemConfig {
    SystemConfig {
        ratio,
        height: size,
        width: size,
        stages,
        prox: ProxConfig {
            channels,
            ..ProxConfig::default()
        },
        mode,
        ..SystemConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_seed_gives_identical_init() {
        let cfg = system_config(0.2, ApertureMode::Binary, 8, 2, 4);
        let a = ImagingSystem::<f32>::new(cfg.clone()).unwrap();
        let b = ImagingSystem::<f32>::new(cfg).unwrap();
        for (p, q) in a.params().iter().zip(b.params()) {
            assert_eq!(p.value, q.value);
            assert_eq!(p.name, q.name);
        }
    }

    #[test]
    fn reconstruction_is_deterministic_and_shaped() {
        let cfg = system_config(0.5, ApertureMode::Binary, 8, 3, 4);
        let sys = ImagingSystem::<f32>::new(cfg).unwrap();
        let scene: Vec<f32> = (0..64).map(|i| (i as f32) / 64.0).collect();
        let a = sys.reconstruct(&scene, &NoiseSpec::none(), 0).unwrap();
        let b = sys.reconstruct(&scene, &NoiseSpec::none(), 0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.output().len(), 64);
        assert_eq!(a.num_stages(), 3);
    }

    #[test]
    fn cast_roundtrip_preserves_f32_weights() {
        let cfg = system_config(0.5, ApertureMode::Binary, 8, 2, 4);
        let sys = ImagingSystem::<f32>::new(cfg).unwrap();
        let back: ImagingSystem<f32> = sys.cast::<f64>().cast();
        for (p, q) in sys.params().iter().zip(back.params()) {
            assert_eq!(p.value, q.value);
        }
    }
}
