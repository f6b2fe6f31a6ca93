//! Command-line front end: `train-teacher`, `train-baseline`, `distill`,
//! `eval`, `gradcheck` and `report`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{synth_dataset, Dataset, Manifest, Split};
use crate::error::{Error, Result};
use crate::eval::{emit_report, evaluate, psnr_table, read_metrics, write_metrics, EvalLabels, METRICS_FILE};
use crate::sensing::ApertureMode;
use crate::system::{ImagingSystem, SystemConfig};
use crate::training::{fit_e2e, fit_kd, Checkpoint, EpochRecord, Role, TrainConfig};
use crate::verify::{gradient_suite, tiny_config, GRADCHECK_EPS, GRADCHECK_TOL};

/// One JSON config file per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub id: String,
    pub system: SystemConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            id: "run".into(),
            system: SystemConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// `split path` manifest; relative to the working directory.
    pub manifest: Option<PathBuf>,
    pub train_limit: Option<usize>,
    pub val_limit: Option<usize>,
    pub test_limit: Option<usize>,
    /// Generated scenes instead of a manifest.
    pub synthetic: Option<SyntheticData>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub train: usize,
    pub test: usize,
    pub seed: u64,
}

#[derive(Debug, Parser)]
#[command(name = "spckd", version, about = "Single-pixel camera training, distillation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a teacher system end to end.
    TrainTeacher(TrainArgs),
    /// Train a baseline student end to end.
    TrainBaseline(TrainArgs),
    /// Distill a frozen teacher checkpoint into a binary student.
    Distill(TrainArgs),
    /// Evaluate a checkpoint on the test split of a manifest.
    Eval(EvalArgs),
    /// Finite-difference check of every parameter gradient.
    Gradcheck(GradcheckArgs),
    /// Tables and charts from a metrics CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Teacher checkpoint (distill only).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// 8x8 scene, one band, two stages, four channels, ratio 0.5.
    #[arg(long)]
    tiny: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 2 for usage errors, 1 otherwise.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::TrainTeacher(a) => train(a, Role::Teacher),
        Command::TrainBaseline(a) => train(a, Role::Baseline),
        Command::Distill(a) => train(a, Role::Student),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Report(a) => report(a),
    }
}

struct Splits {
    train: Option<Dataset>,
    val: Option<Dataset>,
    test: Option<Dataset>,
}

fn load_splits(cfg: &DataConfig, manifest: Option<&Path>, system: &SystemConfig) -> Result<Splits> {
    let limit = |d: Option<Dataset>, n: Option<usize>| d.map(|d| n.map_or(d.clone(), |n| d.take(n)));
    let (train, val, test) = match (manifest.or(cfg.manifest.as_deref()), cfg.synthetic) {
        (Some(path), _) => {
            let m = Manifest::read(path)?;
            (m.load(Split::Train)?, m.load(Split::Val)?, m.load(Split::Test)?)
        }
        (None, Some(s)) => {
            let gen = |count, seed| synth_dataset(seed, count, system.height, system.width, system.bands);
            let test = if s.test > 0 { Some(gen(s.test, s.seed.wrapping_add(1))?.with_split(Split::Test)) } else { None };
            (Some(gen(s.train, s.seed)?), None, test)
        }
        (None, None) => return Err(Error::Usage("no data: pass --data <manifest> or set data.manifest".into())),
    };
    let fit = |d: Option<Dataset>| -> Result<Option<Dataset>> {
        match d {
            Some(d) if d.bands != system.bands => Err(Error::config(format!(
                "data has {} bands, system expects {}",
                d.bands, system.bands
            ))),
            Some(d) => d.resized(system.height, system.width).map(Some),
            None => Ok(None),
        }
    };
    Ok(Splits {
        train: fit(limit(train, cfg.train_limit))?,
        val: fit(limit(val, cfg.val_limit))?,
        test: fit(limit(test, cfg.test_limit))?,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn log_epoch(role: Role) -> impl FnMut(&EpochRecord) {
    move |r| {
        let val = r.val_psnr.map(|q| format!(" val_psnr={q:.2}dB")).unwrap_or_default();
        eprintln!(
            "[{}] epoch {} steps={} loss={:.6}{val} ({:.1}s)",
            role.as_str(),
            r.epoch,
            r.steps,
            r.train_loss,
            r.seconds
        );
    }
}

fn train(args: TrainArgs, role: Role) -> Result<i32> {
    let mut cfg = ExperimentConfig::read(&args.config)?;
    cfg.train.role = role;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if role == Role::Student {
        if let Some(ck) = args.checkpoint {
            cfg.train.teacher_checkpoint = Some(ck);
        }
    } else if args.checkpoint.is_some() {
        return Err(Error::Usage("--checkpoint names a teacher and is only valid for distill".into()));
    }
    cfg.train.validate()?;
    let splits = load_splits(&cfg.data, args.data.as_deref(), &cfg.system)?;
    let train_set = splits
        .train
        .ok_or_else(|| Error::config("the data source has no train split"))?;

    let mut sys_cfg = cfg.system.clone();
    sys_cfg.seed = cfg.train.seed;
    let system = ImagingSystem::new(sys_cfg)?;
    let mut observer = log_epoch(role);
    let ck = match role {
        Role::Student => {
            let path = cfg.train.teacher_checkpoint.clone().expect("validated");
            let teacher = Checkpoint::load(&path)?;
            fit_kd(system, &teacher, &cfg.train, &train_set, splits.val.as_ref(), &mut observer)?
        }
        _ => fit_e2e(system, &cfg.train, &train_set, splits.val.as_ref(), &mut observer)?,
    };

    create_dir(&args.out)?;
    let ck_path = args.out.join(format!("{}.spkd", role.as_str()));
    ck.save(&ck_path)?;
    let hist_path = args.out.join(format!("{}_history.json", role.as_str()));
    std::fs::write(&hist_path, serde_json::to_string_pretty(&ck.history)?).map_err(|e| Error::io(&hist_path, e))?;
    println!("checkpoint: {}", ck_path.display());
    if let Some(test) = &splits.test {
        let sys = ck.to_system()?;
        let record = evaluate(&sys, test, &cfg.train.noise, EvalLabels::from_checkpoint(cfg.id.clone(), &ck))?;
        write_metrics(std::slice::from_ref(&record), args.out.join(METRICS_FILE))?;
        println!("test psnr {:.3} dB over {} scenes", record.psnr_db, record.samples);
    }
    Ok(0)
}

fn eval(args: EvalArgs) -> Result<i32> {
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::read(p)?,
        None => ExperimentConfig::default(),
    };
    let ck = Checkpoint::load(&args.checkpoint)?;
    let splits = load_splits(&cfg.data, args.data.as_deref(), &ck.system)?;
    let test = splits
        .test
        .ok_or_else(|| Error::config("the data source has no test split"))?;
    let noise = ck.train.as_ref().map(|t| t.noise).unwrap_or(cfg.train.noise);
    let id = match &args.config {
        Some(_) => cfg.id.clone(),
        None => args
            .checkpoint
            .file_stem()
            .map_or("eval".into(), |s| s.to_string_lossy().into_owned()),
    };
    let record = evaluate(&ck.to_system()?, &test, &noise, EvalLabels::from_checkpoint(id, &ck))?;
    create_dir(&args.out)?;
    let path = args.out.join(METRICS_FILE);
    write_metrics(std::slice::from_ref(&record), &path)?;
    println!(
        "psnr {:.3} dB  ssim {}  ({} scenes) -> {}",
        record.psnr_db,
        record.ssim.map_or("n/a".into(), |s| format!("{s:.4}")),
        record.samples,
        path.display()
    );
    Ok(0)
}

fn gradcheck(args: GradcheckArgs) -> Result<i32> {
    let base = match (&args.config, args.tiny) {
        (_, true) => tiny_config(ApertureMode::Binary),
        (Some(p), false) => ExperimentConfig::read(p)?.system,
        (None, false) => return Err(Error::Usage("gradcheck needs --tiny or --config".into())),
    };
    let report = gradient_suite(&base, args.seed, GRADCHECK_EPS)?;
    for case in &report.cases {
        let worst = case.report.worst();
        println!(
            "{:<24} max rel error {:.3e}  ({} kinked entries skipped){}",
            case.label,
            case.report.max_rel_error(),
            case.report.kinked(),
            worst.map_or(String::new(), |w| format!("  worst: {}[{}]", w.name, w.worst_index))
        );
    }
    let max = report.max_rel_error();
    println!("max relative error {max:.3e} (tolerance {GRADCHECK_TOL:e})");
    Ok(if report.passed(GRADCHECK_TOL) { 0 } else { 1 })
}

fn report(args: ReportArgs) -> Result<i32> {
    let records = read_metrics(&args.input)?;
    let files = emit_report(&records, &args.out)?;
    print!("{}", psnr_table(&records));
    println!("charts: {} {}", files.psnr_chart.display(), files.stage_chart.display());
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flag_and_missing_config_exit_two() {
        assert_eq!(run_command(["spckd", "train-teacher", "--bogus"]), 2);
        assert_eq!(run_command(["spckd", "train-teacher"]), 2);
        assert_eq!(run_command(["spckd", "gradcheck"]), 2);
    }

    #[test]
    fn unreadable_config_exits_one() {
        assert_eq!(run_command(["spckd", "train-teacher", "--config", "/nonexistent/cfg.json"]), 1);
    }

    #[test]
    fn config_defaults_fill_missing_keys() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"system": {"ratio": 0.3}}"#).unwrap();
        assert_eq!(cfg.system.ratio, 0.3);
        assert_eq!(cfg.system.stages, 7);
        assert_eq!(cfg.train.batch_size, 32);
    }
}
