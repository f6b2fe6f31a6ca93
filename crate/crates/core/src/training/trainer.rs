//! End-to-end and distillation training loops.
//!
//! Each sample gets its own tape; samples of a batch run on a worker pool
//! and their gradients are folded into the parameters in sample order, so
//! results do not depend on the worker count.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, Optimizer, OptimizerKind};
use crate::data::Dataset;
use crate::distill::{record_kd_loss, DistillConfig, TeacherTargets};
use crate::error::{Error, Result};
use crate::eval::{mse, psnr};
use crate::numerics::{Gradients, HasParams, Real, Tape, Tensor, Var};
use crate::sensing::{ApertureMode, NoiseSpec};
use crate::system::{ImagingSystem, SystemConfig};

/// Noise streams at and above this offset are reserved for evaluation.
pub const EVAL_STREAM: u64 = 1 << 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Teacher,
    Baseline,
    #[serde(rename = "student_kd")]
    Student,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Teacher => "teacher",
            Role::Baseline => "baseline",
            Role::Student => "student_kd",
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        match self {
            Role::Teacher | Role::Baseline => 1e-4,
            Role::Student => 1e-3,
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teacher" => Ok(Role::Teacher),
            "baseline" => Ok(Role::Baseline),
            "student_kd" | "student" | "kd" => Ok(Role::Student),
            other => Err(Error::config(format!("unknown role '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// `None` picks the role default.
    pub learning_rate: Option<f64>,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub role: Role,
    pub noise: NoiseSpec,
    /// Hard cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
    pub distill: Option<DistillConfig>,
    pub teacher_checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: None,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            role: Role::Teacher,
            noise: NoiseSpec::none(),
            max_steps: None,
            distill: None,
            teacher_checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
            .unwrap_or(self.role.default_learning_rate())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        let lr = self.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {lr} must be positive"
            )));
        }
        match (self.role, &self.teacher_checkpoint) {
            (Role::Student, None) => Err(Error::config(
                "a distilled student needs teacher_checkpoint",
            )),
            (Role::Teacher | Role::Baseline, Some(_)) => Err(Error::config(format!(
                "role {} must not name a teacher checkpoint",
                self.role.as_str()
            ))),
            _ => self.distill.unwrap_or_default().validate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub steps: usize,
    /// Mean training loss over the epoch's steps.
    pub train_loss: f64,
    pub val_mse: Option<f64>,
    pub val_psnr: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean batch loss at every optimizer step.
    pub step_losses: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept.
    pub best_epoch: Option<usize>,
}

/// Worker pool capped by `SPCKD_THREADS` when set.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SPCKD_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::config(format!(
                "SPCKD_THREADS must be a positive integer, got '{v}'"
            ))
        })?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

/// Mean MSE and PSNR of `system` over `data`, using realized apertures.
pub fn validate(
    system: &ImagingSystem<f32>,
    data: &Dataset,
    noise: &NoiseSpec,
    pool: &rayon::ThreadPool,
) -> Result<(f64, f64)> {
    let per: Vec<(f64, f64)> = pool.install(|| {
        data.samples()
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let trace = system.reconstruct(x, noise, EVAL_STREAM + i as u64)?;
                Ok((
                    mse(trace.output().data(), x)?,
                    psnr(trace.output().data(), x)?,
                ))
            })
            .collect::<Result<_>>()
    })?;
    let n = per.len().max(1) as f64;
    Ok((
        per.iter().map(|p| p.0).sum::<f64>() / n,
        per.iter().map(|p| p.1).sum::<f64>() / n,
    ))
}

fn check_data(system: &ImagingSystem<f32>, data: &Dataset, what: &str) -> Result<()> {
    if data.scene_len() != system.shape().scene_len() {
        return Err(Error::config(format!(
            "{what} scenes are {}x{}x{}, system expects {}x{}x{}",
            data.height,
            data.width,
            data.bands,
            system.config.height,
            system.config.width,
            system.config.bands
        )));
    }
    Ok(())
}

/// Shared optimization loop. `sample_loss(system, tape, index, stream)`
/// records the unscaled loss of one training scene.
fn optimize<F>(
    system: &mut ImagingSystem<f32>,
    cfg: &TrainConfig,
    train: &Dataset,
    val: Option<&Dataset>,
    observer: &mut dyn FnMut(&EpochRecord),
    sample_loss: F,
) -> Result<(TrainHistory, usize)>
where
    F: Fn(&ImagingSystem<f32>, &mut Tape<f32>, usize, u64) -> Result<Var> + Sync,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    check_data(system, train, "training")?;
    if let Some(v) = val {
        check_data(system, v, "validation")?;
    }
    let pool = worker_pool()?;
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate());
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, Vec<Tensor<f32>>)> = None;
    let p = train.len();
    let mut order: Vec<usize> = (0..p).collect();

    'epochs: for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        order.sort_unstable();
        order.shuffle(&mut rng);
        let first_step = history.step_losses.len();
        let mut done = false;

        for batch in order.chunks(cfg.batch_size) {
            if cfg
                .max_steps
                .is_some_and(|m| history.step_losses.len() >= m)
            {
                done = true;
                break;
            }
            let scale = 1.0 / batch.len() as f32;
            let shared: &ImagingSystem<f32> = system;
            let results: Vec<(f64, Gradients<f32>)> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| {
                        let mut tape = Tape::new();
                        let loss = sample_loss(shared, &mut tape, i, (epoch * p + i) as u64)?;
                        let value = tape.scalar(loss) as f64;
                        let scaled = tape.scale(loss, scale)?;
                        Ok((value, tape.backward(scaled)?))
                    })
                    .collect::<Result<_>>()
            })?;
            let mut params = system.params_mut();
            for (_, g) in &results {
                for param in params.iter_mut() {
                    param.accumulate(g);
                }
            }
            optimizer.step(params)?;
            history
                .step_losses
                .push(results.iter().map(|r| r.0).sum::<f64>() / results.len() as f64);
        }

        let steps = &history.step_losses[first_step..];
        if steps.is_empty() {
            break;
        }
        let (val_mse, val_psnr) = match val {
            Some(v) if !v.is_empty() => {
                let (m, q) = validate(system, v, &cfg.noise, &pool)?;
                (Some(m), Some(q))
            }
            _ => (None, None),
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            steps: steps.len(),
            train_loss: steps.iter().sum::<f64>() / steps.len() as f64,
            val_mse,
            val_psnr,
            seconds: started.elapsed().as_secs_f64(),
        };
        observer(&record);
        if let Some(q) = val_psnr {
            if best.as_ref().map_or(true, |b| q > b.0) {
                best = Some((
                    q,
                    epoch + 1,
                    system.params().iter().map(|p| p.value.clone()).collect(),
                ));
            }
        }
        history.epochs.push(record);
        if done {
            break 'epochs;
        }
    }

    let last = history.epochs.last().map_or(0, |e| e.epoch);
    let kept = match best {
        Some((_, epoch, values)) => {
            for (p, v) in system.params_mut().into_iter().zip(values) {
                p.value = v;
            }
            epoch
        }
        None => last,
    };
    history.best_epoch = Some(kept);
    Ok((history, kept))
}

fn finish(
    system: &ImagingSystem<f32>,
    cfg: &TrainConfig,
    history: TrainHistory,
    epoch: usize,
    teacher_ratio: Option<f64>,
) -> Checkpoint {
    let mut ck = Checkpoint::from_system(system);
    ck.role = Some(cfg.role);
    ck.train = Some(cfg.clone());
    ck.epoch = epoch;
    ck.history = history;
    ck.teacher_ratio = teacher_ratio;
    ck
}

/// Records `mean((x^L - x)²)` for one scene.
pub fn record_mse_loss<T: Real>(
    system: &ImagingSystem<T>,
    tape: &mut Tape<T>,
    scene: &[T],
    noise: &NoiseSpec,
    stream: u64,
) -> Result<Var> {
    let trace = system.record(tape, scene, noise, stream)?;
    let target = tape.constant(Tensor::vector(scene.to_vec()))?;
    let gap = tape.sub(trace.output(), target)?;
    let sq = tape.sum_squares(gap)?;
    tape.scale(sq, T::of(1.0 / scene.len() as f64))
}

/// Trains encoder and decoder jointly on the reconstruction MSE, starting
/// from `system`. Keeps the best-validation weights when `val` is given,
/// otherwise the final ones.
pub fn fit_e2e(
    mut system: ImagingSystem<f32>,
    cfg: &TrainConfig,
    train: &Dataset,
    val: Option<&Dataset>,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<Checkpoint> {
    if cfg.role == Role::Student {
        return Err(Error::config(
            "end-to-end training is for teacher or baseline roles",
        ));
    }
    let noise = cfg.noise;
    let (history, epoch) = optimize(
        &mut system,
        cfg,
        train,
        val,
        observer,
        |sys, tape, i, stream| record_mse_loss(sys, tape, train.sample(i), &noise, stream),
    )?;
    Ok(finish(&system, cfg, history, epoch, None))
}

pub fn train_e2e(
    system: &SystemConfig,
    cfg: &TrainConfig,
    train: &Dataset,
    val: Option<&Dataset>,
) -> Result<Checkpoint> {
    let mut sys_cfg = system.clone();
    sys_cfg.seed = cfg.seed;
    fit_e2e(ImagingSystem::new(sys_cfg)?, cfg, train, val, &mut |_| {})
}

/// Distills a frozen teacher into `student` with the KD loss only.
pub fn fit_kd(
    mut student: ImagingSystem<f32>,
    teacher: &Checkpoint,
    cfg: &TrainConfig,
    train: &Dataset,
    val: Option<&Dataset>,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<Checkpoint> {
    if cfg.role != Role::Student {
        return Err(Error::config("distillation requires role student_kd"));
    }
    if student.mode() != ApertureMode::Binary {
        return Err(Error::config(
            "the distilled student must use binary apertures",
        ));
    }
    let mut teacher_sys = teacher.to_system()?;
    teacher_sys.freeze();
    let (ts, ss) = (&teacher_sys.config, &student.config);
    if ts.stages != ss.stages {
        return Err(Error::config(format!(
            "teacher has {} stages, student {}; correlation congruence needs equal counts",
            ts.stages, ss.stages
        )));
    }
    if (ts.height, ts.width, ts.bands) != (ss.height, ss.width, ss.bands) {
        return Err(Error::config(
            "teacher and student must image the same scene shape",
        ));
    }
    check_data(&student, train, "training")?;
    let distill = cfg.distill.unwrap_or_default();
    let noise = cfg.noise;

    // noiseless teachers give the same targets every epoch
    let cached: Option<Vec<TeacherTargets<f32>>> = if noise == NoiseSpec::none() {
        let pool = worker_pool()?;
        Some(pool.install(|| {
            train
                .samples()
                .par_iter()
                .map(|x| {
                    TeacherTargets::from_trace(&teacher_sys.reconstruct(x, &noise, 0)?, &distill)
                })
                .collect::<Result<_>>()
        })?)
    } else {
        None
    };

    let (history, epoch) = optimize(
        &mut student,
        cfg,
        train,
        val,
        observer,
        |sys, tape, i, stream| {
            let x = train.sample(i);
            let fresh;
            let targets = match &cached {
                Some(c) => &c[i],
                None => {
                    fresh = TeacherTargets::from_trace(
                        &teacher_sys.reconstruct(x, &noise, stream)?,
                        &distill,
                    )?;
                    &fresh
                }
            };
            let trace = sys.record(tape, x, &noise, stream)?;
            record_kd_loss(tape, &trace, targets, &distill)
        },
    )?;
    Ok(finish(
        &student,
        cfg,
        history,
        epoch,
        Some(teacher.system.ratio),
    ))
}

pub fn train_kd(
    system: &SystemConfig,
    cfg: &TrainConfig,
    train: &Dataset,
    val: Option<&Dataset>,
    teacher: &Checkpoint,
) -> Result<Checkpoint> {
    let mut sys_cfg = system.clone();
    sys_cfg.seed = cfg.seed;
    fit_kd(
        ImagingSystem::new(sys_cfg)?,
        teacher,
        cfg,
        train,
        val,
        &mut |_| {},
    )
}
