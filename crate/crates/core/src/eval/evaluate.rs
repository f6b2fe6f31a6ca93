use std::time::Instant;

use rayon::prelude::*;

use super::metrics::{psnr, ssim_band_major};
use super::report::MetricRecord;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sensing::NoiseSpec;
use crate::system::ImagingSystem;
use crate::training::{worker_pool, Checkpoint, EVAL_STREAM};

const SSIM_MIN_SIDE: usize = 11;

/// Labels attached to an evaluation.
#[derive(Clone, Debug, Default)]
pub struct EvalLabels {
    pub id: String,
    pub role: String,
    pub gamma_t: Option<f64>,
}

impl EvalLabels {
    pub fn from_checkpoint(id: impl Into<String>, ck: &Checkpoint) -> Self {
        EvalLabels {
            id: id.into(),
            role: ck.role.map_or("untrained", |r| r.as_str()).to_string(),
            gamma_t: ck.teacher_ratio,
        }
    }
}

/// Mean PSNR, SSIM and per-stage PSNR over `data`, reconstructing with the
/// realized apertures. Deterministic for a fixed noise spec.
pub fn evaluate(
    system: &ImagingSystem<f32>,
    data: &Dataset,
    noise: &NoiseSpec,
    labels: EvalLabels,
) -> Result<MetricRecord> {
    if data.is_empty() {
        return Err(Error::config("evaluation set is empty"));
    }
    let (h, w, j) = (data.height, data.width, data.bands);
    if data.scene_len() != system.shape().scene_len() {
        return Err(Error::config(format!(
            "evaluation scenes are {h}x{w}x{j}, system expects {}x{}x{}",
            system.config.height, system.config.width, system.config.bands
        )));
    }
    let with_ssim = h >= SSIM_MIN_SIDE && w >= SSIM_MIN_SIDE;
    let started = Instant::now();
    let pool = worker_pool()?;
    let per: Vec<(f64, f64, Vec<f64>)> = pool.install(|| {
        data.samples()
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let trace = system.reconstruct(x, noise, EVAL_STREAM + i as u64)?;
                let out = trace.output().data();
                let s = if with_ssim {
                    ssim_band_major(out, x, h, w, j)?
                } else {
                    f64::NAN
                };
                let stages = trace
                    .x_stages
                    .iter()
                    .map(|t| psnr(t.data(), x))
                    .collect::<Result<Vec<_>>>()?;
                Ok((psnr(out, x)?, s, stages))
            })
            .collect::<Result<_>>()
    })?;
    let n = per.len() as f64;
    let stages = system.config.stages;
    let mut stage_psnr = vec![0.0; stages];
    for (_, _, s) in &per {
        for (acc, v) in stage_psnr.iter_mut().zip(s) {
            *acc += v;
        }
    }
    stage_psnr.iter_mut().for_each(|q| *q /= n);
    Ok(MetricRecord {
        id: labels.id,
        role: labels.role,
        gamma_t: labels.gamma_t,
        gamma_s: system.config.ratio,
        psnr_db: per.iter().map(|p| p.0).sum::<f64>() / n,
        ssim: with_ssim.then(|| per.iter().map(|p| p.1).sum::<f64>() / n),
        stage_psnr,
        samples: per.len(),
        seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_dataset;
    use crate::sensing::ApertureMode;
    use crate::system::system_config;

    #[test]
    fn evaluation_is_pure() {
        let sys =
            ImagingSystem::<f32>::new(system_config(0.5, ApertureMode::Binary, 12, 2, 4)).unwrap();
        let data = synth_dataset(3, 3, 12, 12, 1).unwrap();
        let a = evaluate(
            &sys,
            &data,
            &NoiseSpec::awgn(30.0, 1),
            EvalLabels::default(),
        )
        .unwrap();
        let b = evaluate(
            &sys,
            &data,
            &NoiseSpec::awgn(30.0, 1),
            EvalLabels::default(),
        )
        .unwrap();
        assert_eq!(
            (a.psnr_db, a.ssim, &a.stage_psnr),
            (b.psnr_db, b.ssim, &b.stage_psnr)
        );
        assert_eq!(a.stage_psnr.len(), 2);
        assert_eq!(a.stage_psnr[1], a.psnr_db);
        assert_eq!(a.samples, 3);
        assert!(a.ssim.unwrap().abs() <= 1.0);
    }

    #[test]
    fn small_scenes_skip_ssim() {
        let sys =
            ImagingSystem::<f32>::new(system_config(0.5, ApertureMode::Binary, 8, 2, 4)).unwrap();
        let data = synth_dataset(3, 2, 8, 8, 1).unwrap();
        let r = evaluate(&sys, &data, &NoiseSpec::none(), EvalLabels::default()).unwrap();
        assert_eq!(r.ssim, None);
    }
}
