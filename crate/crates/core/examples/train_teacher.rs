//! Trains a small binary teacher end to end, saves it, and reloads it.

use spckd::data::{encode_idx, parse_idx, synth_garments, Dataset, Split, GARMENT_SIZE};
use spckd::eval::{evaluate, EvalLabels};
use spckd::sensing::{ApertureMode, NoiseSpec};
use spckd::system::{system_config, ImagingSystem};
use spckd::training::{fit_e2e, Checkpoint, Role, TrainConfig};

fn garments(seed: u64, count: usize, size: usize, split: Split) -> spckd::Result<Dataset> {
    let raw = encode_idx(&[count, GARMENT_SIZE, GARMENT_SIZE], &synth_garments(seed, count))?;
    Dataset::from_stack(&parse_idx(&raw)?, split, "synthetic garments")?.resized(size, size)
}

fn main() -> spckd::Result<()> {
    let train = garments(1, 256, 16, Split::Train)?;
    let val = garments(2, 64, 16, Split::Val)?;

    let mut cfg = system_config(0.8, ApertureMode::Binary, 16, 4, 8);
    cfg.seed = 1;
    let run = TrainConfig { epochs: 4, batch_size: 16, learning_rate: Some(1e-3), role: Role::Teacher, seed: 1, ..TrainConfig::default() };
    let ckpt = fit_e2e(ImagingSystem::new(cfg)?, &run, &train, Some(&val), &mut |r| {
        println!(
            "epoch {}: {} steps, train loss {:.5}, val {:.2} dB ({:.1}s)",
            r.epoch,
            r.steps,
            r.train_loss,
            r.val_psnr.unwrap_or(f64::NAN),
            r.seconds
        )
    })?;
    println!("kept epoch {:?}", ckpt.history.best_epoch);

    let path = std::env::temp_dir().join("spckd_teacher.spkd");
    ckpt.save(&path)?;
    let restored = Checkpoint::load(&path)?.to_system()?;
    let labels = EvalLabels::from_checkpoint("teacher", &ckpt);
    let m = evaluate(&restored, &val, &NoiseSpec::none(), labels)?;
    println!("reloaded from {}: {:.2} dB over {} scenes", path.display(), m.psnr_db, m.samples);
    Ok(())
}
