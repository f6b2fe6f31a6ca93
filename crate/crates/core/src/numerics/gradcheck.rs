//! Central-difference verification of tape gradients (f64 only).

use super::{HasParams, Tape, Tensor, Var};
use crate::error::Result;

/// Denominator floor for the relative error.
pub const REL_FLOOR: f64 = 1e-8;

/// Per-parameter outcome of a gradient check.
#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Entries left out because a probe crossed a kink.
    pub kinked: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn kinked(&self) -> usize {
        self.params.iter().map(|p| p.kinked).sum()
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// `|a − n| / max(|n|, 1e-8)`, measured against the numeric reference.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(REL_FLOOR)
}

/// Gradient of the recorded loss w.r.t. every parameter of `model`, in
/// `params()` order. Parameters that do not participate get zeros.
pub fn analytic_gradient<M, F>(model: &mut M, forward: F) -> Result<Vec<Tensor<f64>>>
where
    M: HasParams<f64>,
    F: Fn(&M, &mut Tape<f64>) -> Result<Var>,
{
    model.zero_grad();
    let mut tape = Tape::new();
    let loss = forward(model, &mut tape)?;
    let grads = tape.backward(loss)?;
    model.accumulate(&grads);
    Ok(model.params().iter().map(|p| p.gradient.clone()).collect())
}

/// Central-difference estimates plus, per entry, whether either probe
/// landed on a different smooth piece than the unperturbed point.
#[derive(Clone, Debug)]
pub struct NumericGradient {
    pub values: Vec<Tensor<f64>>,
    pub kinked: Vec<Vec<bool>>,
}

/// Central differences `(f(p+ε) − f(p−ε)) / 2ε` for every parameter entry.
pub fn numeric_gradient<M, F>(model: &mut M, forward: F, eps: f64) -> Result<NumericGradient>
where
    M: HasParams<f64>,
    F: Fn(&M, &mut Tape<f64>) -> Result<Var>,
{
    let eval = |m: &M| -> Result<(f64, u64)> {
        let mut tape = Tape::inference();
        let loss = forward(m, &mut tape)?;
        Ok((tape.scalar(loss), tape.activation_pattern()))
    };
    let (_, base) = eval(model)?;
    let count = model.params().len();
    let mut values = Vec::with_capacity(count);
    let mut kinked = Vec::with_capacity(count);
    for pi in 0..count {
        let len = model.params()[pi].value.len();
        let mut g = Tensor::zeros(model.params()[pi].value.shape().to_vec());
        let mut k = vec![false; len];
        for i in 0..len {
            let orig = model.params()[pi].value.data()[i];
            model.params_mut()[pi].value.data_mut()[i] = orig + eps;
            let (plus, pp) = eval(model)?;
            model.params_mut()[pi].value.data_mut()[i] = orig - eps;
            let (minus, pm) = eval(model)?;
            model.params_mut()[pi].value.data_mut()[i] = orig;
            g.data_mut()[i] = (plus - minus) / (2.0 * eps);
            k[i] = pp != base || pm != base;
        }
        values.push(g);
        kinked.push(k);
    }
    Ok(NumericGradient { values, kinked })
}

/// Compares analytic gradients with central differences entry by entry,
/// skipping entries whose probes straddle a kink.
pub fn compare(
    names: &[String],
    analytic: &[Tensor<f64>],
    numeric: &NumericGradient,
) -> GradCheckReport {
    let params = names
        .iter()
        .zip(
            analytic
                .iter()
                .zip(numeric.values.iter().zip(&numeric.kinked)),
        )
        .map(|(name, (a, (n, kinked)))| {
            let mut worst = ParamCheck {
                name: name.clone(),
                max_rel_error: 0.0,
                worst_index: 0,
                analytic: 0.0,
                numeric: 0.0,
                kinked: kinked.iter().filter(|&&k| k).count(),
            };
            for (i, (&av, &nv)) in a.data().iter().zip(n.data()).enumerate() {
                if kinked[i] {
                    continue;
                }
                let e = relative_error(av, nv);
                if e > worst.max_rel_error {
                    worst = ParamCheck {
                        max_rel_error: e,
                        worst_index: i,
                        analytic: av,
                        numeric: nv,
                        ..worst
                    };
                }
            }
            worst
        })
        .collect();
    GradCheckReport { params }
}

/// Analytic vs central-difference gradients for every parameter of `model`.
pub fn finite_diff_check<M, F>(model: &mut M, forward: F, eps: f64) -> Result<GradCheckReport>
where
    M: HasParams<f64>,
    F: Fn(&M, &mut Tape<f64>) -> Result<Var>,
{
    let analytic = analytic_gradient(model, &forward)?;
    let numeric = numeric_gradient(model, &forward, eps)?;
    let names: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    Ok(compare(&names, &analytic, &numeric))
}
