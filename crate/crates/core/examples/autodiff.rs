//! The reverse-mode tape on its own: a conv, ReLU and soft threshold,
//! differentiated and checked against central differences.

use spckd::numerics::{finite_diff_check, HasParams, Parameter, Tape, Tensor, Var};

struct Tiny {
    kernel: Parameter<f64>,
    bias: Parameter<f64>,
    beta: Parameter<f64>,
}

impl HasParams<f64> for Tiny {
    fn params(&self) -> Vec<&Parameter<f64>> {
        vec![&self.kernel, &self.bias, &self.beta]
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter<f64>> {
        vec![&mut self.kernel, &mut self.bias, &mut self.beta]
    }
}

fn loss(m: &Tiny, tape: &mut Tape<f64>) -> spckd::Result<Var> {
    let img = tape.constant(Tensor::new([1, 5, 5], (0..25).map(|i| (i as f64 * 0.37).sin()).collect())?)?;
    let k = tape.param(&m.kernel)?;
    let b = tape.param(&m.bias)?;
    let beta = tape.param(&m.beta)?;
    let h = tape.conv2d_same(img, k, b)?;
    let h = tape.relu(h)?;
    let h = tape.soft_threshold(h, beta)?;
    tape.sum_squares(h)
}

fn main() -> spckd::Result<()> {
    let mut m = Tiny {
        kernel: Parameter::new("kernel", Tensor::new([2, 1, 3, 3], (0..18).map(|i| 0.1 * (i as f64 - 8.5)).collect())?),
        bias: Parameter::new("bias", Tensor::vector(vec![0.05, -0.02])),
        beta: Parameter::new("beta", Tensor::scalar(0.1)),
    };

    let mut tape = Tape::new();
    let l = loss(&m, &mut tape)?;
    println!("loss = {:.6} over {} tape nodes", tape.scalar(l), tape.len());
    let grads = tape.backward(l)?;
    m.accumulate(&grads);
    println!("d loss / d beta = {:.6}", m.beta.gradient.data()[0]);

    let report = finite_diff_check(&mut m, loss, 1e-5)?;
    for p in &report.params {
        println!("{:>6}: max relative error {:.2e}", p.name, p.max_rel_error);
    }
    Ok(())
}
