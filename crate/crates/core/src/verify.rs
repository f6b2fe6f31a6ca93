//! Finite-difference verification of every trainable parameter of an
//! imaging system, under the end-to-end and the distillation losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::synth_dataset;
use crate::distill::{record_kd_loss, DistillConfig, FeatureKind, TeacherTargets};
use crate::error::Result;
use crate::numerics::{
    analytic_gradient, compare, numeric_gradient, GradCheckReport, HasParams, Tensor,
};
use crate::recovery::ConvLayer;
use crate::sensing::{ApertureMode, CodedApertureBank, NoiseSpec};
use crate::system::{system_config, ImagingSystem, SystemConfig};
use crate::training::record_mse_loss;

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;

/// `8×8`, one band, two stages, four channels, `γ = 0.5`.
pub fn tiny_config(mode: ApertureMode) -> SystemConfig {
    system_config(0.5, mode, 8, 2, 4)
}

#[derive(Clone, Debug)]
pub struct SuiteCase {
    pub label: String,
    pub report: GradCheckReport,
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub cases: Vec<SuiteCase>,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.cases
            .iter()
            .map(|c| c.report.max_rel_error())
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error() <= tol
    }
}

/// Moves the stage scalars and biases away from their initial values so the
/// check runs at a generic point where the proximal branch carries real
/// weight in the loss. Kernels are widened to the He bound `√(6/fan_in)`:
/// at the training init the deep conv stacks pass gradients of order 1e-9,
/// below what central differences resolve against the 1e-8 floor.
pub fn generic_point(system: &mut ImagingSystem<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    for stage in &mut system.net.stages {
        stage.alpha.value = Tensor::scalar(rng.gen_range(0.3..0.6));
        stage.rho.value = Tensor::scalar(rng.gen_range(0.3..0.6));
        stage.beta.value = Tensor::scalar(rng.gen_range(0.02..0.08));
        let widen = |layer: &mut ConvLayer<f64>| {
            layer.kernel.value.data_mut().iter_mut().for_each(|w| *w *= 6f64.sqrt())
        };
        widen(&mut stage.restore);
        for layer in stage.encoder.iter_mut().chain(stage.decoder.iter_mut()) {
            widen(layer);
            layer
                .bias
                .value
                .data_mut()
                .iter_mut()
                .for_each(|b| *b = rng.gen_range(-0.05..0.05));
        }
    }
}

/// Copy of `system` with every decoder weight jittered by a few percent.
/// Keeping the teacher close keeps the distillation loss small, so the
/// central differences are not swamped by rounding of a large loss value.
fn nearby_teacher(system: &ImagingSystem<f64>, seed: u64) -> ImagingSystem<f64> {
    let mut teacher = system.clone();
    teacher.freeze();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7EAC);
    for p in teacher.net.params_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v *= 1.0 + rng.gen_range(-0.05..0.05));
    }
    teacher
}

/// Copy of `system` whose apertures are real-valued and equal to the binary
/// realization. Its finite differences are what the straight-through
/// gradient of the binary system should reproduce.
fn real_valued_twin(system: &ImagingSystem<f64>) -> Result<ImagingSystem<f64>> {
    let bank = CodedApertureBank::from_latent(
        system.shape(),
        ApertureMode::RealValued,
        system.bank.realized(),
    )?;
    let mut config = system.config.clone();
    config.mode = ApertureMode::RealValued;
    Ok(ImagingSystem {
        config,
        bank,
        net: system.net.clone(),
    })
}

enum Loss<'a> {
    EndToEnd,
    Distill(&'a TeacherTargets<f64>, &'a DistillConfig),
}

fn check(
    system: &ImagingSystem<f64>,
    scene: &[f64],
    loss: &Loss,
    eps: f64,
) -> Result<GradCheckReport> {
    let forward = |sys: &ImagingSystem<f64>, tape: &mut crate::numerics::Tape<f64>| match loss {
        Loss::EndToEnd => record_mse_loss(sys, tape, scene, &NoiseSpec::none(), 0),
        Loss::Distill(targets, cfg) => {
            let trace = sys.record(tape, scene, &NoiseSpec::none(), 0)?;
            record_kd_loss(tape, &trace, targets, cfg)
        }
    };
    let mut analytic_sys = system.clone();
    let analytic = analytic_gradient(&mut analytic_sys, forward)?;
    let mut numeric_sys = match system.mode() {
        ApertureMode::Binary => real_valued_twin(system)?,
        ApertureMode::RealValued => system.clone(),
    };
    let numeric = numeric_gradient(&mut numeric_sys, forward, eps)?;
    let names: Vec<String> = system.params().iter().map(|p| p.name.clone()).collect();
    Ok(compare(&names, &analytic, &numeric))
}

/// Runs both aperture modes under both losses for a system shaped like
/// `base`.
pub fn gradient_suite(base: &SystemConfig, seed: u64, eps: f64) -> Result<SuiteReport> {
    let scene: Vec<f64> = synth_dataset(seed, 1, base.height, base.width, base.bands)?
        .sample(0)
        .iter()
        .map(|&v| v as f64)
        .collect();
    let mut report = SuiteReport::default();
    for mode in [ApertureMode::RealValued, ApertureMode::Binary] {
        let mut cfg = base.clone();
        cfg.mode = mode;
        cfg.seed = seed;
        let mut system = ImagingSystem::<f64>::new(cfg)?;
        generic_point(&mut system, seed);
        let tag = match mode {
            ApertureMode::Binary => "binary",
            ApertureMode::RealValued => "real_valued",
        };
        report.cases.push(SuiteCase {
            label: format!("e2e/{tag}"),
            report: check(&system, &scene, &Loss::EndToEnd, eps)?,
        });
        let teacher = nearby_teacher(&system, seed);
        let teacher_trace = teacher.reconstruct(&scene, &NoiseSpec::none(), 0)?;
        for kind in [FeatureKind::Sparse, FeatureKind::NonSparse] {
            // a looser kernel keeps the congruence term visible next to imitation
            let distill = DistillConfig {
                feature_kind: kind,
                inv_two_sigma_sq: 1e-2,
                ..DistillConfig::default()
            };
            let targets = TeacherTargets::from_trace(&teacher_trace, &distill)?;
            let kind = match kind {
                FeatureKind::Sparse => "sparse",
                FeatureKind::NonSparse => "non_sparse",
            };
            report.cases.push(SuiteCase {
                label: format!("kd_{kind}/{tag}"),
                report: check(&system, &scene, &Loss::Distill(&targets, &distill), eps)?,
            });
        }
    }
    Ok(report)
}
