//! Run the unrolled ADMM network on a scene and inspect every stage.

use spckd::data::synth_dataset;
use spckd::eval::psnr;
use spckd::sensing::{ApertureMode, NoiseSpec};
use spckd::system::{system_config, ImagingSystem};

fn main() -> spckd::Result<()> {
    let cfg = system_config(0.5, ApertureMode::Binary, 32, 7, 32);
    let system = ImagingSystem::<f32>::new(cfg)?;
    let scene = synth_dataset(3, 1, 32, 32, 1)?.sample(0).to_vec();

    let trace = system.reconstruct(&scene, &NoiseSpec::none(), 0)?;
    println!("x0 (reprojection): {:6.2} dB", psnr(trace.x0.data(), &scene)?);
    for (k, x) in trace.x_stages.iter().enumerate() {
        let code = &trace.sparse_codes[k];
        let zeros = code.data().iter().filter(|v| **v == 0.0).count();
        println!(
            "stage {}: {:6.2} dB, sparse code {:.0}% zeros",
            k + 1,
            psnr(x.data(), &scene)?,
            100.0 * zeros as f64 / code.len() as f64
        );
    }
    println!("(untrained weights; see the training examples)");
    Ok(())
}
