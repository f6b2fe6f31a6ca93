//! The full desk-scale comparison: one binary teacher, then for every
//! student ratio an end-to-end baseline and two distilled students (sparse
//! and non-sparse features). Writes metrics, a PSNR table and charts.
//!
//! cargo run --release --example distillation_sweep -- --train 2000 --test 500 --ratios 0.1,0.2,0.3

use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use spckd::data::{encode_idx, parse_idx, synth_garments, Dataset, Split, GARMENT_SIZE};
use spckd::distill::{DistillConfig, FeatureKind};
use spckd::eval::{emit_report, evaluate, psnr_table, EvalLabels, MetricRecord};
use spckd::sensing::{ApertureMode, NoiseSpec};
use spckd::system::{system_config, ImagingSystem, SystemConfig};
use spckd::training::{fit_e2e, fit_kd, Checkpoint, Role, TrainConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 2000)]
    train: usize,
    #[arg(long, default_value_t = 500)]
    test: usize,
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 0.8)]
    teacher_ratio: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    teacher_epochs: usize,
    #[arg(long, default_value_t = 10)]
    student_epochs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Shared by every role.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Load the teacher instead of training it.
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long, default_value = "sweep_out")]
    out: PathBuf,
}

fn garments(seed: u64, count: usize, size: usize, split: Split) -> spckd::Result<Dataset> {
    let raw = encode_idx(&[count, GARMENT_SIZE, GARMENT_SIZE], &synth_garments(seed, count))?;
    Dataset::from_stack(&parse_idx(&raw)?, split, "synthetic garments")?.resized(size, size)
}

fn main() -> spckd::Result<()> {
    let args = Args::parse();
    std::fs::create_dir_all(&args.out).map_err(|e| spckd::Error::Io { path: args.out.clone(), source: e })?;
    let train = garments(1, args.train, args.size, Split::Train)?;
    let test = garments(2, args.test, args.size, Split::Test)?;
    let system = |ratio: f64| {
        ImagingSystem::new(SystemConfig {
            seed: args.seed,
            ..system_config(ratio, ApertureMode::Binary, args.size, 7, args.channels)
        })
    };
    let run = |role: Role, epochs: usize| TrainConfig {
        epochs,
        seed: args.seed,
        role,
        learning_rate: Some(args.lr),
        ..TrainConfig::default()
    };
    let clock = Instant::now();
    let progress = &mut |r: &spckd::training::EpochRecord| {
        eprintln!("    epoch {:>2}  loss {:.5}  {:.0}s", r.epoch, r.train_loss, r.seconds)
    };

    let score = |ckpt: &Checkpoint, id: String| -> spckd::Result<MetricRecord> {
        let labels = EvalLabels::from_checkpoint(id, ckpt);
        let m = evaluate(&ckpt.to_system()?, &test, &NoiseSpec::none(), labels)?;
        eprintln!("{:<22} {:6.2} dB   ({:.0}s elapsed)", m.id, m.psnr_db, clock.elapsed().as_secs_f64());
        Ok(m)
    };
    let mut records = Vec::new();

    let teacher_path = args.out.join("teacher.spkd");
    let teacher = match &args.teacher {
        Some(path) => Checkpoint::load(path)?,
        None => {
            eprintln!("teacher, ratio {}", args.teacher_ratio);
            let t = fit_e2e(system(args.teacher_ratio)?, &run(Role::Teacher, args.teacher_epochs), &train, None, progress)?;
            t.save(&teacher_path)?;
            t
        }
    };
    if args.teacher.is_some() {
        teacher.save(&teacher_path)?;
    }
    records.push(score(&teacher, format!("teacher-{}", args.teacher_ratio))?);

    for &ratio in &args.ratios {
        eprintln!("baseline, ratio {ratio}");
        let baseline = fit_e2e(system(ratio)?, &run(Role::Baseline, args.student_epochs), &train, None, progress)?;
        records.push(score(&baseline, format!("baseline-{ratio}"))?);
        for (kind, tag) in [(FeatureKind::Sparse, "kd_sparse"), (FeatureKind::NonSparse, "kd_non_sparse")] {
            eprintln!("{tag}, ratio {ratio}");
            let cfg = TrainConfig {
                distill: Some(DistillConfig { feature_kind: kind, ..DistillConfig::default() }),
                teacher_checkpoint: Some(teacher_path.clone()),
                ..run(Role::Student, args.student_epochs)
            };
            let student = fit_kd(system(ratio)?, &teacher, &cfg, &train, None, progress)?;
            // one column per feature kind in the table
            let mut m = score(&student, format!("{tag}-{ratio}"))?;
            m.role = tag.into();
            records.push(m);
        }
    }

    let files = emit_report(&records, &args.out)?;
    println!("{}", psnr_table(&records));
    println!("wrote {} and charts in {}", files.metrics.display(), args.out.display());
    Ok(())
}
