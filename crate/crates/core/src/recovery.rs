//! ADMM-unrolled reconstruction with a learned proximal autoencoder.
//!
//! Stage `k` performs, in order,
//!
//! ```text
//! z, f = prox_k(x + u)
//! x'   = x − α_k·( (1/K)·Hᵀ(Hx − y) + ρ_k·(x − z + u) )
//! u'   = u + x' − z
//! ```
//!
//! where `prox_k` encodes with four conv+ReLU layers, soft-thresholds the code
//! with `|β_k|`, and decodes with three conv+ReLU layers plus a restoring
//! convolution back to `J` channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{HasParams, Parameter, Real, Tape, Tensor, Var};
use crate::sensing::{CodedApertureBank, SensingShape};

pub const DEFAULT_STAGES: usize = 7;
pub const INIT_ALPHA: f64 = 0.1;
pub const INIT_RHO: f64 = 0.1;
pub const INIT_BETA: f64 = 0.01;

/// Proximal autoencoder layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxConfig {
    pub channels: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
}

impl Default for ProxConfig {
    fn default() -> Self {
        ProxConfig {
            channels: 32,
            encoder_layers: 4,
            decoder_layers: 3,
        }
    }
}

/// One 3×3 convolution: kernel `[c_out, c_in, 3, 3]` and bias `[c_out]`.
#[derive(Clone, Debug)]
pub struct ConvLayer<T: Real> {
    pub kernel: Parameter<T>,
    pub bias: Parameter<T>,
}

impl<T: Real> ConvLayer<T> {
    /// Uniform kernel with bound `1/√fan_in`, zero bias.
    fn init(name: &str, cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = (cin * 9) as f64;
        let bound = (1.0 / fan_in).sqrt();
        let data = (0..cout * cin * 9)
            .map(|_| T::of(rng.gen_range(-bound..bound)))
            .collect();
        ConvLayer {
            kernel: Parameter::new(
                format!("{name}.kernel"),
                Tensor::new([cout, cin, 3, 3], data).expect("kernel shape"),
            ),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros([cout])),
        }
    }

    fn apply(&self, tape: &mut Tape<T>, input: Var) -> Result<Var> {
        let k = tape.param(&self.kernel)?;
        let b = tape.param(&self.bias)?;
        tape.conv2d_same(input, k, b)
    }
}

/// Learnable quantities of one unrolled stage.
#[derive(Clone, Debug)]
pub struct StageParams<T: Real> {
    pub alpha: Parameter<T>,
    pub rho: Parameter<T>,
    pub beta: Parameter<T>,
    pub encoder: Vec<ConvLayer<T>>,
    pub decoder: Vec<ConvLayer<T>>,
    pub restore: ConvLayer<T>,
}

impl<T: Real> StageParams<T> {
    fn init(index: usize, bands: usize, prox: &ProxConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = prox.channels;
        let name = |s: &str| format!("stage{index}.{s}");
        let encoder = (0..prox.encoder_layers)
            .map(|i| {
                ConvLayer::init(
                    &name(&format!("enc{i}")),
                    if i == 0 { bands } else { c },
                    c,
                    rng,
                )
            })
            .collect();
        let decoder = (0..prox.decoder_layers)
            .map(|i| ConvLayer::init(&name(&format!("dec{i}")), c, c, rng))
            .collect();
        let restore_in = if prox.decoder_layers == 0 && prox.encoder_layers == 0 {
            bands
        } else {
            c
        };
        StageParams {
            alpha: Parameter::new(name("alpha"), Tensor::scalar(T::of(INIT_ALPHA))),
            rho: Parameter::new(name("rho"), Tensor::scalar(T::of(INIT_RHO))),
            beta: Parameter::new(name("beta"), Tensor::scalar(T::of(INIT_BETA))),
            encoder,
            decoder,
            restore: ConvLayer::init(&name("restore"), restore_in, bands, rng),
        }
    }

    fn layers(&self) -> impl Iterator<Item = &ConvLayer<T>> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .chain(std::iter::once(&self.restore))
    }
}

impl<T: Real> HasParams<T> for StageParams<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        let mut v = vec![&self.alpha, &self.rho, &self.beta];
        for l in self.layers() {
            v.push(&l.kernel);
            v.push(&l.bias);
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let StageParams {
            alpha,
            rho,
            beta,
            encoder,
            decoder,
            restore,
        } = self;
        let mut v = vec![alpha, rho, beta];
        for l in encoder
            .iter_mut()
            .chain(decoder.iter_mut())
            .chain(std::iter::once(restore))
        {
            v.push(&mut l.kernel);
            v.push(&mut l.bias);
        }
        v
    }
}

/// The `L`-stage unrolled recovery network.
#[derive(Clone, Debug)]
pub struct RecoveryNet<T: Real> {
    pub stages: Vec<StageParams<T>>,
    pub prox: ProxConfig,
    pub shape: SensingShape,
}

impl<T: Real> RecoveryNet<T> {
    pub fn new(shape: SensingShape, stages: usize, prox: ProxConfig, seed: u64) -> Result<Self> {
        if stages == 0 {
            return Err(Error::config(
                "the unrolled network needs at least one stage",
            ));
        }
        if prox.channels == 0 || (prox.encoder_layers + prox.decoder_layers) == 0 {
            return Err(Error::config("proximal network needs channels and layers"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stages = (0..stages)
            .map(|k| StageParams::init(k, shape.bands, &prox, &mut rng))
            .collect();
        Ok(RecoveryNet {
            stages,
            prox,
            shape,
        })
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Length of one flattened sparse code, `M·N·C`.
    pub fn code_len(&self) -> usize {
        self.shape.pixels() * self.prox.channels
    }
}

impl<T: Real> HasParams<T> for RecoveryNet<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        self.stages.iter().flat_map(|s| s.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        self.stages
            .iter_mut()
            .flat_map(|s| s.params_mut())
            .collect()
    }
}

/// Tape handles produced by one stage.
#[derive(Clone, Copy, Debug)]
pub struct StageVars {
    pub x: Var,
    pub u: Var,
    pub z: Var,
    /// Soft-thresholded code inside this stage's proximal step.
    pub f: Var,
}

/// Tape handles of a full unrolled pass.
#[derive(Clone, Debug)]
pub struct TraceVars {
    pub x0: Var,
    pub stages: Vec<StageVars>,
}

impl TraceVars {
    /// Final reconstruction `x^L`.
    pub fn output(&self) -> Var {
        self.stages.last().expect("at least one stage").x
    }

    pub fn codes(&self) -> Vec<Var> {
        self.stages.iter().map(|s| s.f).collect()
    }

    pub fn iterates(&self) -> Vec<Var> {
        self.stages.iter().map(|s| s.x).collect()
    }

    /// Copies all recorded values off the tape.
    pub fn collect<T: Real>(&self, tape: &Tape<T>) -> ReconstructionTrace<T> {
        let flat = |v: Var| {
            let t = tape.value(v);
            Tensor::vector(t.data().to_vec())
        };
        ReconstructionTrace {
            x0: flat(self.x0),
            x_stages: self.stages.iter().map(|s| flat(s.x)).collect(),
            u_stages: self.stages.iter().map(|s| flat(s.u)).collect(),
            z_stages: self.stages.iter().map(|s| flat(s.z)).collect(),
            sparse_codes: self.stages.iter().map(|s| flat(s.f)).collect(),
        }
    }
}

/// Per-stage states of one reconstruction, all flattened.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionTrace<T> {
    pub x0: Tensor<T>,
    pub x_stages: Vec<Tensor<T>>,
    pub u_stages: Vec<Tensor<T>>,
    pub z_stages: Vec<Tensor<T>>,
    pub sparse_codes: Vec<Tensor<T>>,
}

impl<T: Real> ReconstructionTrace<T> {
    pub fn num_stages(&self) -> usize {
        self.x_stages.len()
    }

    pub fn output(&self) -> &Tensor<T> {
        self.x_stages.last().expect("at least one stage")
    }
}

/// Handles of one proximal evaluation.
#[derive(Clone, Copy, Debug)]
pub struct ProxVars {
    /// Encoder output before shrinkage, `[C, M, N]`.
    pub pre_threshold: Var,
    /// Flattened sparse code.
    pub code: Var,
    /// Flattened denoised scene.
    pub output: Var,
}

/// Learned proximal step: returns `(z, f)` for a flattened scene `v`.
pub fn prox_apply<T: Real>(
    tape: &mut Tape<T>,
    stage: &StageParams<T>,
    shape: &SensingShape,
    v: Var,
) -> Result<(Var, Var)> {
    let p = prox_apply_full(tape, stage, shape, v)?;
    Ok((p.output, p.code))
}

pub fn prox_apply_full<T: Real>(
    tape: &mut Tape<T>,
    stage: &StageParams<T>,
    shape: &SensingShape,
    v: Var,
) -> Result<ProxVars> {
    if tape.value(v).len() != shape.scene_len() {
        return Err(Error::shape(format!(
            "proximal input has {} values, expected {}",
            tape.value(v).len(),
            shape.scene_len()
        )));
    }
    let mut h = tape.reshape(v, &[shape.bands, shape.height, shape.width])?;
    for layer in &stage.encoder {
        h = layer.apply(tape, h)?;
        h = tape.relu(h)?;
    }
    let pre_threshold = h;
    let beta = tape.param(&stage.beta)?;
    let f = tape.soft_threshold(h, beta)?;
    let mut h = f;
    for layer in &stage.decoder {
        h = layer.apply(tape, h)?;
        h = tape.relu(h)?;
    }
    let z = stage.restore.apply(tape, h)?;
    let z = tape.reshape(z, &[shape.scene_len()])?;
    let f_len = tape.value(f).len();
    let code = tape.reshape(f, &[f_len])?;
    Ok(ProxVars {
        pre_threshold,
        code,
        output: z,
    })
}

/// Proximal step with an arbitrary replacement for the learned network.
pub type ProxFn<'a, T> =
    dyn Fn(&mut Tape<T>, &StageParams<T>, &SensingShape, Var) -> Result<(Var, Var)> + 'a;

/// One ADMM stage with the learned proximal step.
pub fn admm_stage<T: Real>(
    tape: &mut Tape<T>,
    stage: &StageParams<T>,
    bank: &CodedApertureBank<T>,
    h: Var,
    y: Var,
    x: Var,
    u: Var,
) -> Result<StageVars> {
    admm_stage_with(tape, stage, bank, h, y, x, u, &prox_apply)
}

/// [`admm_stage`] with a caller-supplied proximal step.
#[allow(clippy::too_many_arguments)]
pub fn admm_stage_with<T: Real>(
    tape: &mut Tape<T>,
    stage: &StageParams<T>,
    bank: &CodedApertureBank<T>,
    h: Var,
    y: Var,
    x: Var,
    u: Var,
    prox: &ProxFn<'_, T>,
) -> Result<StageVars> {
    let v = tape.add(x, u)?;
    let (z, f) = prox(tape, stage, &bank.shape, v)?;

    let hx = tape.band_matvec(h, x, false, T::one())?;
    let resid = tape.sub(hx, y)?;
    let data_grad = tape.band_matvec(h, resid, true, bank.adjoint_scale())?;

    let xz = tape.sub(x, z)?;
    let penalty = tape.add(xz, u)?;
    let rho = tape.param(&stage.rho)?;
    let penalty = tape.mul_scalar(rho, penalty)?;

    let direction = tape.add(data_grad, penalty)?;
    let alpha = tape.param(&stage.alpha)?;
    let step = tape.mul_scalar(alpha, direction)?;
    let x_next = tape.sub(x, step)?;

    let gap = tape.sub(x_next, z)?;
    let u_next = tape.add(u, gap)?;
    Ok(StageVars {
        x: x_next,
        u: u_next,
        z,
        f,
    })
}

/// Runs all `L` stages from `x⁰ = (1/K)·Hᵀy`, `u⁰ = 0`.
pub fn unrolled_forward<T: Real>(
    tape: &mut Tape<T>,
    net: &RecoveryNet<T>,
    bank: &CodedApertureBank<T>,
    h: Var,
    y: Var,
) -> Result<TraceVars> {
    unrolled_forward_with(tape, net, bank, h, y, &prox_apply)
}

pub fn unrolled_forward_with<T: Real>(
    tape: &mut Tape<T>,
    net: &RecoveryNet<T>,
    bank: &CodedApertureBank<T>,
    h: Var,
    y: Var,
    prox: &ProxFn<'_, T>,
) -> Result<TraceVars> {
    if net.shape.height != bank.shape.height
        || net.shape.width != bank.shape.width
        || net.shape.bands != bank.shape.bands
    {
        return Err(Error::shape(
            "recovery network and sensing bank disagree on scene shape",
        ));
    }
    let x0 = bank.reproject(tape, h, y)?;
    let mut x = x0;
    let mut u = tape.constant(Tensor::zeros([bank.shape.scene_len()]))?;
    let mut stages = Vec::with_capacity(net.stages.len());
    for stage in &net.stages {
        let s = admm_stage_with(tape, stage, bank, h, y, x, u, prox)?;
        x = s.x;
        u = s.u;
        stages.push(s);
    }
    Ok(TraceVars { x0, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{build_sensing, ApertureMode};

    fn tiny_net(bands: usize) -> (CodedApertureBank<f64>, RecoveryNet<f64>) {
        let bank = build_sensing(0.5, 6, 5, bands, ApertureMode::Binary, 1).unwrap();
        let prox = ProxConfig {
            channels: 3,
            ..ProxConfig::default()
        };
        let net = RecoveryNet::new(bank.shape, 2, prox, 4).unwrap();
        (bank, net)
    }

    fn scene(n: usize) -> Tensor<f64> {
        Tensor::vector((0..n).map(|i| 0.5 + 0.4 * (i as f64 * 0.7).sin()).collect())
    }

    #[test]
    fn zero_stages_rejected() {
        let shape = SensingShape::new(0.5, 4, 4, 1).unwrap();
        let err = RecoveryNet::<f32>::new(shape, 0, ProxConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn zero_encoder_gives_zero_code() {
        let (_, mut net) = tiny_net(1);
        for l in &mut net.stages[0].encoder {
            l.kernel.value.data_mut().iter_mut().for_each(|w| *w = 0.0);
        }
        let mut tape = Tape::inference();
        let v = tape.constant(scene(30)).unwrap();
        let (_, f) = prox_apply(&mut tape, &net.stages[0], &net.shape, v).unwrap();
        assert!(tape.value(f).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn huge_threshold_shrinks_everything() {
        let (_, mut net) = tiny_net(1);
        net.stages[0].beta.value.data_mut()[0] = 1e6;
        let mut tape = Tape::inference();
        let v = tape.constant(scene(30)).unwrap();
        let (z, f) = prox_apply(&mut tape, &net.stages[0], &net.shape, v).unwrap();
        assert!(tape.value(f).data().iter().all(|&x| x == 0.0));

        // z must equal the decoder applied to an all-zero code
        let mut t2 = Tape::inference();
        let mut h = t2
            .constant(Tensor::zeros([
                net.prox.channels,
                net.shape.height,
                net.shape.width,
            ]))
            .unwrap();
        for l in &net.stages[0].decoder {
            h = l.apply(&mut t2, h).unwrap();
            h = t2.relu(h).unwrap();
        }
        let z2 = net.stages[0].restore.apply(&mut t2, h).unwrap();
        assert_eq!(tape.value(z).data(), t2.value(z2).data());
    }

    #[test]
    fn code_is_at_least_as_sparse_as_its_input() {
        let (_, mut net) = tiny_net(1);
        net.stages[0].beta.value.data_mut()[0] = 0.3;
        let mut tape = Tape::inference();
        let v = tape.constant(scene(30)).unwrap();
        let p = prox_apply_full(&mut tape, &net.stages[0], &net.shape, v).unwrap();
        let code = tape.value(p.code).data().to_vec();
        let pre = tape.value(p.pre_threshold).data().to_vec();
        let zeros = |v: &[f64]| v.iter().filter(|&&x| x == 0.0).count();
        assert!(zeros(&code) >= zeros(&pre));
        for (c, p) in code.iter().zip(&pre) {
            if p.abs() <= 0.3 {
                assert_eq!(*c, 0.0);
            }
        }
    }

    #[test]
    fn prox_rejects_wrong_length() {
        let (_, net) = tiny_net(1);
        let mut tape = Tape::inference();
        let v = tape.constant(scene(29)).unwrap();
        assert!(matches!(
            prox_apply(&mut tape, &net.stages[0], &net.shape, v),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_step_keeps_iterate() {
        let (bank, mut net) = tiny_net(1);
        net.stages[0].alpha.value.data_mut()[0] = 0.0;
        let mut tape = Tape::inference();
        let h = bank.record(&mut tape).unwrap();
        let xs = tape.constant(scene(30)).unwrap();
        let y = bank
            .spc_forward(&mut tape, h, xs, &Default::default(), 0)
            .unwrap();
        let x = tape.constant(scene(30).map(|v| v * 0.3)).unwrap();
        let u = tape.constant(Tensor::full([30], 0.05)).unwrap();
        let s = admm_stage(&mut tape, &net.stages[0], &bank, h, y, x, u).unwrap();
        assert_eq!(tape.value(s.x), tape.value(x));
    }

    #[test]
    fn dual_update_identity() {
        let (bank, net) = tiny_net(2);
        let mut tape = Tape::inference();
        let h = bank.record(&mut tape).unwrap();
        let xs = tape.constant(scene(60)).unwrap();
        let y = bank
            .spc_forward(&mut tape, h, xs, &Default::default(), 0)
            .unwrap();
        let trace = unrolled_forward(&mut tape, &net, &bank, h, y).unwrap();
        let tr = trace.collect(&tape);
        let mut prev_u = Tensor::<f64>::zeros([60]);
        for k in 0..tr.num_stages() {
            for i in 0..60 {
                let du = tr.u_stages[k].data()[i] - prev_u.data()[i];
                let gap = tr.x_stages[k].data()[i] - tr.z_stages[k].data()[i];
                assert!((du - gap).abs() <= 1e-12 * (1.0 + gap.abs()));
            }
            prev_u = tr.u_stages[k].clone();
        }
    }

    #[test]
    fn hand_evaluated_gradient_step() {
        let shape = SensingShape::new(0.5, 1, 2, 1).unwrap();
        let bank = CodedApertureBank::from_latent(
            shape,
            ApertureMode::RealValued,
            Tensor::new([1, 2], vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let prox = ProxConfig {
            channels: 1,
            ..ProxConfig::default()
        };
        let mut net = RecoveryNet::<f64>::new(shape, 1, prox, 0).unwrap();
        net.stages[0].alpha.value.data_mut()[0] = 0.5;
        net.stages[0].rho.value.data_mut()[0] = 0.1;
        let identity: &ProxFn<'_, f64> = &|_t, _s, _sh, v| Ok((v, v));
        let mut tape = Tape::inference();
        let h = bank.record(&mut tape).unwrap();
        let y = tape.constant(Tensor::vector(vec![3.0])).unwrap();
        let x = tape.constant(Tensor::vector(vec![1.0, 1.0])).unwrap();
        let u = tape.constant(Tensor::zeros([2])).unwrap();
        let s = admm_stage_with(&mut tape, &net.stages[0], &bank, h, y, x, u, identity).unwrap();
        assert_eq!(tape.value(s.x).data(), &[1.5, 1.5]);
    }

    #[test]
    fn trace_has_one_entry_per_stage() {
        let bank = build_sensing::<f32>(0.25, 8, 8, 1, ApertureMode::Binary, 0).unwrap();
        let prox = ProxConfig {
            channels: 2,
            ..ProxConfig::default()
        };
        let net = RecoveryNet::new(bank.shape, DEFAULT_STAGES, prox, 0).unwrap();
        let mut tape = Tape::inference();
        let h = bank.record(&mut tape).unwrap();
        let x = tape.constant(Tensor::full([64], 0.5)).unwrap();
        let y = bank
            .spc_forward(&mut tape, h, x, &Default::default(), 0)
            .unwrap();
        let tr = unrolled_forward(&mut tape, &net, &bank, h, y)
            .unwrap()
            .collect(&tape);
        assert_eq!(tr.x_stages.len(), 7);
        assert_eq!(tr.u_stages.len(), 7);
        assert_eq!(tr.z_stages.len(), 7);
        assert_eq!(tr.sparse_codes.len(), 7);
        assert!(tr.sparse_codes.iter().all(|f| f.len() == 64 * 2));
    }
}
