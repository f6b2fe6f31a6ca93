//! Distills a binary low-ratio student from a richer teacher and compares
//! it with the same student trained end to end on ground truth.

use spckd::data::{encode_idx, parse_idx, synth_garments, Dataset, Split, GARMENT_SIZE};
use spckd::distill::{DistillConfig, FeatureKind};
use spckd::eval::{evaluate, EvalLabels};
use spckd::sensing::{ApertureMode, NoiseSpec};
use spckd::system::{system_config, ImagingSystem, SystemConfig};
use spckd::training::{fit_e2e, fit_kd, Checkpoint, Role, TrainConfig};

const SIZE: usize = 16;

fn garments(seed: u64, count: usize, split: Split) -> spckd::Result<Dataset> {
    let raw = encode_idx(&[count, GARMENT_SIZE, GARMENT_SIZE], &synth_garments(seed, count))?;
    Dataset::from_stack(&parse_idx(&raw)?, split, "synthetic garments")?.resized(SIZE, SIZE)
}

fn system(ratio: f64) -> spckd::Result<ImagingSystem<f32>> {
    ImagingSystem::new(SystemConfig { seed: 2, ..system_config(ratio, ApertureMode::Binary, SIZE, 4, 8) })
}

fn run(role: Role) -> TrainConfig {
    TrainConfig { epochs: 10, batch_size: 16, learning_rate: Some(1e-3), role, seed: 2, ..TrainConfig::default() }
}

fn psnr(ckpt: &Checkpoint, id: &str, test: &Dataset) -> spckd::Result<f64> {
    let m = evaluate(&ckpt.to_system()?, test, &NoiseSpec::none(), EvalLabels::from_checkpoint(id, ckpt))?;
    Ok(m.psnr_db)
}

fn main() -> spckd::Result<()> {
    let train = garments(1, 1000, Split::Train)?;
    let test = garments(2, 64, Split::Test)?;
    let quiet = &mut |_: &_| {};

    let teacher = fit_e2e(system(0.8)?, &run(Role::Teacher), &train, None, quiet)?;
    let teacher_path = std::env::temp_dir().join("spckd_distill_teacher.spkd");
    teacher.save(&teacher_path)?;
    println!("teacher   (ratio 0.8): {:.2} dB", psnr(&teacher, "teacher", &test)?);

    let baseline = fit_e2e(system(0.2)?, &run(Role::Baseline), &train, None, quiet)?;
    println!("baseline  (ratio 0.2): {:.2} dB", psnr(&baseline, "baseline", &test)?);

    for kind in [FeatureKind::Sparse, FeatureKind::NonSparse] {
        let cfg = TrainConfig {
            distill: Some(DistillConfig { feature_kind: kind, ..DistillConfig::default() }),
            teacher_checkpoint: Some(teacher_path.clone()),
            ..run(Role::Student)
        };
        let student = fit_kd(system(0.2)?, &teacher, &cfg, &train, None, quiet)?;
        println!("student   (ratio 0.2, {kind:?} features): {:.2} dB", psnr(&student, "student", &test)?);
    }
    Ok(())
}
