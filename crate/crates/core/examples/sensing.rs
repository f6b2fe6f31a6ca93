//! Measure a scene with a binary coded-aperture bank, reproject it, and
//! save the realized apertures.

use spckd::data::synth_dataset;
use spckd::eval::psnr;
use spckd::sensing::{build_sensing, ApertureFile, ApertureMode, NoiseSpec};

fn main() -> spckd::Result<()> {
    let scene = synth_dataset(7, 1, 32, 32, 1)?.sample(0).to_vec();

    for ratio in [0.1, 0.3, 0.8] {
        let bank = build_sensing::<f32>(ratio, 32, 32, 1, ApertureMode::Binary, 7)?;
        let y = bank.measure(&scene, &NoiseSpec::none(), 0)?;
        let x0 = bank.reproject_values(&y)?;
        let noisy = bank.measure(&scene, &NoiseSpec::awgn(25.0, 1), 0)?;
        let x0_noisy = bank.reproject_values(&noisy)?;
        println!(
            "ratio {ratio:.1}: K = {:4} snapshots, reprojection {:.2} dB (noiseless) / {:.2} dB (25 dB SNR)",
            bank.shape.snapshots,
            psnr(&x0, &scene)?,
            psnr(&x0_noisy, &scene)?
        );
    }

    let bank = build_sensing::<f32>(0.25, 32, 32, 1, ApertureMode::Binary, 7)?;
    let path = std::env::temp_dir().join("spckd_apertures.spca");
    bank.export(&path)?;
    let back = ApertureFile::read(&path)?;
    assert_eq!(back.values.len(), bank.shape.snapshots * 32 * 32);
    assert!(back.values.iter().all(|v| v.abs() == 1.0));
    println!("wrote {} binary patterns to {}", back.snapshots, path.display());
    Ok(())
}
