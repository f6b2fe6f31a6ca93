//! Wengert-list reverse-mode differentiation over the operator set used by
//! the sensing model and the unrolled recovery network.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use super::kernels::{self, KSIZE};
use super::{ParamKey, Parameter, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv {
        input: usize,
        kernel: usize,
        bias: usize,
        // im2col buffer kept for the kernel gradient; empty in inference mode
        cols: Vec<T>,
        cin: usize,
        cout: usize,
        h: usize,
        w: usize,
    },
    Relu(usize),
    Soft {
        v: usize,
        beta: usize,
    },
    SignSte(usize),
    BandMatVec {
        mat: usize,
        x: usize,
        rows: usize,
        cols: usize,
        transpose: bool,
        scale: T,
    },
    Reshape(usize),
    Add(usize, usize),
    Sub(usize, usize),
    MulScalar {
        s: usize,
        v: usize,
    },
    Scale {
        v: usize,
        c: T,
    },
    SumSquares(usize),
    Norm(usize),
    Rbf {
        rows: Vec<usize>,
        coef: T,
    },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv { .. } => "conv2d_same",
            Op::Relu(_) => "relu",
            Op::Soft { .. } => "soft_threshold",
            Op::SignSte(_) => "binarize_ste",
            Op::BandMatVec { .. } => "band_matvec",
            Op::Reshape(_) => "reshape",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::MulScalar { .. } => "mul_scalar",
            Op::Scale { .. } => "scale",
            Op::SumSquares(_) => "sum_squares",
            Op::Norm(_) => "norm",
            Op::Rbf { .. } => "rbf_gram",
        }
    }
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    param: Option<ParamKey>,
    needs_grad: bool,
}

/// Ordered record of a forward pass.
///
/// A tape supports exactly one backward pass. Tapes built with
/// [`Tape::inference`] skip all bookkeeping needed for gradients.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    grad_enabled: bool,
    consumed: bool,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], keyed by parameter.
#[derive(Debug)]
pub struct Gradients<T> {
    by_param: HashMap<ParamKey, Tensor<T>>,
    visited: Vec<usize>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, key: ParamKey) -> Option<&Tensor<T>> {
        self.by_param.get(&key)
    }

    /// Node indices in the order the backward sweep processed them.
    pub fn visit_order(&self) -> &[usize] {
        &self.visited
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: true,
            consumed: false,
        }
    }

    /// A tape that only evaluates; `backward` on it is a usage error.
    pub fn inference() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: false,
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(op.name()));
        }
        self.nodes.push(Node {
            value,
            op,
            param: None,
            needs_grad: needs_grad && self.grad_enabled,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, vars: &[usize]) -> bool {
        vars.iter().any(|&i| self.nodes[i].needs_grad)
    }

    /// Fingerprint of every branch decision taken on this tape: ReLU and
    /// sign inputs, soft-threshold regions, norms at the origin. Two passes
    /// with equal fingerprints lie on the same smooth piece of the loss.
    pub fn activation_pattern(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let region: Box<dyn Iterator<Item = u8> + '_> = match node.op {
                Op::Relu(v) => Box::new(
                    self.nodes[v]
                        .value
                        .data()
                        .iter()
                        .map(|&x| (x > T::zero()) as u8),
                ),
                Op::SignSte(v) => Box::new(
                    self.nodes[v]
                        .value
                        .data()
                        .iter()
                        .map(|&x| (x >= T::zero()) as u8),
                ),
                Op::Soft { v, beta } => {
                    let b = self.nodes[beta].value.data()[0];
                    let t = b.abs();
                    let sb = (b >= T::zero()) as u8;
                    Box::new(self.nodes[v].value.data().iter().map(move |&x| {
                        let r = if x > t {
                            1
                        } else if x < -t {
                            2
                        } else {
                            0
                        };
                        r | (sb << 2)
                    }))
                }
                Op::Norm(v) => Box::new(std::iter::once(
                    self.nodes[v].value.data().iter().all(|&x| x == T::zero()) as u8,
                )),
                _ => continue,
            };
            i.hash(&mut h);
            for r in region {
                r.hash(&mut h);
            }
        }
        h.finish()
    }

    /// Records a constant.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push(value, Op::Leaf, false)
    }

    /// Records a parameter. Frozen parameters (`requires_grad == false`)
    /// become constants and never receive gradient.
    pub fn param(&mut self, p: &Parameter<T>) -> Result<Var> {
        let track = p.requires_grad && self.grad_enabled;
        let var = self.push(p.value.clone(), Op::Leaf, track)?;
        if track {
            self.nodes[var.0].param = Some(p.key());
        }
        Ok(var)
    }

    pub fn conv2d_same(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var> {
        let (cin, cout, h, w) =
            kernels::conv_dims(self.value(input), self.value(kernel), self.value(bias))?;
        let cols = kernels::im2col(self.value(input).data(), cin, h, w);
        let out = kernels::conv_forward_cols(
            &cols,
            self.value(kernel).data(),
            self.value(bias).data(),
            cin,
            cout,
            h * w,
        );
        let needs = self.needs(&[input.0, kernel.0, bias.0]);
        let cols = if needs && self.grad_enabled {
            cols
        } else {
            Vec::new()
        };
        self.push(
            Tensor::new([cout, h, w], out)?,
            Op::Conv {
                input: input.0,
                kernel: kernel.0,
                bias: bias.0,
                cols,
                cin,
                cout,
                h,
                w,
            },
            needs,
        )
    }

    pub fn relu(&mut self, v: Var) -> Result<Var> {
        let out = self
            .value(v)
            .map(|x| if x > T::zero() { x } else { T::zero() });
        let needs = self.needs(&[v.0]);
        self.push(out, Op::Relu(v.0), needs)
    }

    /// Shrinkage with effective threshold `|beta|`; `beta` must be a scalar.
    pub fn soft_threshold(&mut self, v: Var, beta: Var) -> Result<Var> {
        if self.value(beta).len() != 1 {
            return Err(Error::shape("soft_threshold: beta must be a scalar"));
        }
        let b = self.scalar(beta);
        let out = kernels::soft_threshold(self.value(v), b);
        let needs = self.needs(&[v.0, beta.0]);
        self.push(
            out,
            Op::Soft {
                v: v.0,
                beta: beta.0,
            },
            needs,
        )
    }

    /// Forward: sign with `sign(0) = +1`. Backward: identity.
    pub fn binarize_ste(&mut self, v: Var) -> Result<Var> {
        let out = self.value(v).map(kernels::binary_sign);
        let needs = self.needs(&[v.0]);
        self.push(out, Op::SignSte(v.0), needs)
    }

    /// Band-wise `scale·M·x_j` (or `scale·Mᵀ·x_j`) with `M` of shape `[rows, cols]`.
    pub fn band_matvec(&mut self, mat: Var, x: Var, transpose: bool, scale: T) -> Result<Var> {
        let &[rows, cols] = self.value(mat).shape() else {
            return Err(Error::shape("band_matvec: matrix must be 2-D"));
        };
        let out = kernels::band_matvec(
            self.value(mat).data(),
            rows,
            cols,
            self.value(x).data(),
            transpose,
            scale,
        )?;
        let needs = self.needs(&[mat.0, x.0]);
        self.push(
            Tensor::vector(out),
            Op::BandMatVec {
                mat: mat.0,
                x: x.0,
                rows,
                cols,
                transpose,
                scale,
            },
            needs,
        )
    }

    fn zip_with(&self, a: Var, b: Var, what: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (ta, tb) = (self.value(a), self.value(b));
        ta.expect_same_len(tb, what)?;
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    /// Same data under a new shape.
    pub fn reshape(&mut self, v: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(v).clone().reshape(shape.to_vec())?;
        let needs = self.needs(&[v.0]);
        self.push(out, Op::Reshape(v.0), needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "add", |x, y| x + y)?;
        let needs = self.needs(&[a.0, b.0]);
        self.push(out, Op::Add(a.0, b.0), needs)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "sub", |x, y| x - y)?;
        let needs = self.needs(&[a.0, b.0]);
        self.push(out, Op::Sub(a.0, b.0), needs)
    }

    /// `s·v` for a scalar variable `s`.
    pub fn mul_scalar(&mut self, s: Var, v: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::shape("mul_scalar: multiplier must be a scalar"));
        }
        let k = self.scalar(s);
        let out = self.value(v).map(|x| k * x);
        let needs = self.needs(&[s.0, v.0]);
        self.push(out, Op::MulScalar { s: s.0, v: v.0 }, needs)
    }

    /// `c·v` for a constant `c`.
    pub fn scale(&mut self, v: Var, c: T) -> Result<Var> {
        let out = self.value(v).map(|x| c * x);
        let needs = self.needs(&[v.0]);
        self.push(out, Op::Scale { v: v.0, c }, needs)
    }

    pub fn sum_squares(&mut self, v: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(v).squared_norm());
        let needs = self.needs(&[v.0]);
        self.push(out, Op::SumSquares(v.0), needs)
    }

    /// Euclidean norm; the gradient at the origin is taken as zero.
    pub fn norm(&mut self, v: Var) -> Result<Var> {
        let out = Tensor::scalar(self.value(v).squared_norm().sqrt());
        let needs = self.needs(&[v.0]);
        self.push(out, Op::Norm(v.0), needs)
    }

    /// Gram matrix `G[i,j] = exp(−coef·‖r_i − r_j‖²)` over equal-length rows.
    pub fn rbf_gram(&mut self, rows: &[Var], coef: T) -> Result<Var> {
        let l = rows.len();
        if l == 0 {
            return Err(Error::shape("rbf_gram: no rows"));
        }
        let n = self.value(rows[0]).len();
        if rows.iter().any(|r| self.value(*r).len() != n) {
            return Err(Error::shape("rbf_gram: rows differ in length"));
        }
        let mut g = vec![T::one(); l * l];
        for i in 0..l {
            for j in (i + 1)..l {
                let d2 = self
                    .value(rows[i])
                    .data()
                    .iter()
                    .zip(self.value(rows[j]).data())
                    .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
                let e = (-coef * d2).exp();
                g[i * l + j] = e;
                g[j * l + i] = e;
            }
        }
        let idx: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let needs = self.needs(&idx);
        self.push(Tensor::new([l, l], g)?, Op::Rbf { rows: idx, coef }, needs)
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if !self.grad_enabled {
            return Err(Error::Usage("backward on an inference tape".into()));
        }
        if self.consumed {
            return Err(Error::Usage(
                "tape already consumed by a backward pass".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Usage("backward requires a scalar loss".into()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        let mut visited = Vec::new();

        for i in (0..=loss.0).rev() {
            visited.push(i);
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].param.is_some() {
                // parameter leaves keep their gradient for collection below
                grads[i] = Some(g);
                continue;
            }
            self.propagate(i, &g, &mut grads)?;
        }

        let mut by_param: HashMap<ParamKey, Tensor<T>> = HashMap::new();
        for (node, g) in self.nodes.iter().zip(grads) {
            let (Some(key), Some(g)) = (node.param, g) else {
                continue;
            };
            let g = Tensor::new(node.value.shape().to_vec(), g)?;
            match by_param.get_mut(&key) {
                Some(acc) => {
                    for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a = *a + b;
                    }
                }
                None => {
                    by_param.insert(key, g);
                }
            }
        }
        Ok(Gradients { by_param, visited })
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) -> Result<()> {
        let nodes = &self.nodes;
        let mut send = |target: usize, contrib: Vec<T>| {
            if !nodes[target].needs_grad {
                return;
            }
            match &mut grads[target] {
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(contrib) {
                        *a = *a + b;
                    }
                }
                slot @ None => *slot = Some(contrib),
            }
        };
        let value = &nodes[i].value;
        match &nodes[i].op {
            Op::Leaf => {}
            &Op::Conv {
                input,
                kernel,
                bias,
                ref cols,
                cin,
                cout,
                h,
                w,
            } => {
                let hw = h * w;
                let k = cin * KSIZE * KSIZE;
                if nodes[bias].needs_grad {
                    let gb = g.chunks(hw).map(|c| c.iter().copied().sum()).collect();
                    send(bias, gb);
                }
                if nodes[kernel].needs_grad {
                    let mut gk = vec![T::zero(); cout * k];
                    T::gemm(cout, hw, k, g, false, cols, true, &mut gk, false);
                    send(kernel, gk);
                }
                if nodes[input].needs_grad {
                    let mut gcols = vec![T::zero(); k * hw];
                    T::gemm(
                        k,
                        cout,
                        hw,
                        nodes[kernel].value.data(),
                        true,
                        g,
                        false,
                        &mut gcols,
                        false,
                    );
                    send(input, kernels::col2im(&gcols, cin, h, w));
                }
            }
            &Op::Relu(v) => {
                let x = nodes[v].value.data();
                let gv = g
                    .iter()
                    .zip(x)
                    .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
                    .collect();
                send(v, gv);
            }
            &Op::Soft { v, beta } => {
                let x = nodes[v].value.data();
                let b = nodes[beta].value.data()[0];
                let tau = b.abs();
                let sb = if b > T::zero() {
                    T::one()
                } else if b < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                };
                let mut gbeta = T::zero();
                let gv = g
                    .iter()
                    .zip(x)
                    .map(|(&g, &x)| {
                        if x.abs() > tau {
                            // d/dβ [sign(x)(|x| − |β|)] = −sign(x)·sign(β)
                            gbeta = gbeta - g * x.signum() * sb;
                            g
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                send(v, gv);
                send(beta, vec![gbeta]);
            }
            &Op::SignSte(v) => send(v, g.to_vec()),
            &Op::BandMatVec {
                mat,
                x,
                rows,
                cols,
                transpose,
                scale,
            } => {
                let xv = nodes[x].value.data();
                let inner = if transpose { rows } else { cols };
                let bands = xv.len() / inner;
                let gs: Vec<T> = g.iter().map(|&v| v * scale).collect();
                if nodes[x].needs_grad {
                    // adjoint of the forward application
                    let gx = kernels::band_matvec(
                        nodes[mat].value.data(),
                        rows,
                        cols,
                        &gs,
                        !transpose,
                        T::one(),
                    )?;
                    send(x, gx);
                }
                if nodes[mat].needs_grad {
                    let mut gm = vec![T::zero(); rows * cols];
                    if transpose {
                        // M[rows, cols] += Xᵀ[rows, bands] · G[bands, cols]
                        T::gemm(rows, bands, cols, xv, true, &gs, false, &mut gm, false);
                    } else {
                        // M[rows, cols] += Gᵀ[rows, bands] · X[bands, cols]
                        T::gemm(rows, bands, cols, &gs, true, xv, false, &mut gm, false);
                    }
                    send(mat, gm);
                }
            }
            &Op::Reshape(v) => send(v, g.to_vec()),
            &Op::Add(a, b) => {
                send(a, g.to_vec());
                send(b, g.to_vec());
            }
            &Op::Sub(a, b) => {
                send(a, g.to_vec());
                send(b, g.iter().map(|&v| -v).collect());
            }
            &Op::MulScalar { s, v } => {
                let k = nodes[s].value.data()[0];
                let xv = nodes[v].value.data();
                if nodes[s].needs_grad {
                    let gs = g
                        .iter()
                        .zip(xv)
                        .fold(T::zero(), |acc, (&g, &x)| acc + g * x);
                    send(s, vec![gs]);
                }
                send(v, g.iter().map(|&g| g * k).collect());
            }
            &Op::Scale { v, c } => send(v, g.iter().map(|&g| g * c).collect()),
            &Op::SumSquares(v) => {
                let two = T::of(2.0);
                let xv = nodes[v].value.data();
                send(v, xv.iter().map(|&x| two * x * g[0]).collect());
            }
            &Op::Norm(v) => {
                let nrm = value.data()[0];
                let xv = nodes[v].value.data();
                if nrm > T::zero() {
                    send(v, xv.iter().map(|&x| g[0] * x / nrm).collect());
                } else {
                    send(v, vec![T::zero(); xv.len()]);
                }
            }
            Op::Rbf { rows, coef } => {
                let l = rows.len();
                let gram = value.data();
                let n = nodes[rows[0]].value.len();
                let mut row_grads = vec![vec![T::zero(); n]; l];
                for a in 0..l {
                    for b in 0..l {
                        if a == b {
                            continue;
                        }
                        // ∂G[a,b]/∂r_a = −2·coef·G[a,b]·(r_a − r_b); G symmetric
                        let w =
                            (g[a * l + b] + g[b * l + a]) * gram[a * l + b] * (-T::of(2.0) * *coef);
                        if w == T::zero() {
                            continue;
                        }
                        let (ra, rb) = (nodes[rows[a]].value.data(), nodes[rows[b]].value.data());
                        for ((acc, &x), &y) in row_grads[a].iter_mut().zip(ra).zip(rb) {
                            *acc = *acc + w * (x - y);
                        }
                    }
                }
                for (r, gr) in rows.iter().zip(row_grads) {
                    send(*r, gr);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let p = Parameter::new("p", Tensor::vector(vec![1.0f64, -2.0]));
        let mut tape = Tape::new();
        let v = tape.param(&p).unwrap();
        let loss = tape.sum_squares(v).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(p.key()).unwrap().data(), &[2.0, -4.0]);
    }

    #[test]
    fn constant_loss_gives_zero_gradient() {
        let mut p = Parameter::new("p", Tensor::vector(vec![1.0f64, 3.0]));
        let mut tape = Tape::new();
        let _ = tape.param(&p).unwrap();
        let c = tape.constant(Tensor::vector(vec![4.0])).unwrap();
        let loss = tape.sum_squares(c).unwrap();
        let grads = tape.backward(loss).unwrap();
        p.accumulate(&grads);
        assert_eq!(p.gradient.data(), &[0.0, 0.0]);
    }

    #[test]
    fn second_backward_is_usage_error() {
        let p = Parameter::new("p", Tensor::scalar(1.0f64));
        let mut tape = Tape::new();
        let v = tape.param(&p).unwrap();
        let loss = tape.sum_squares(v).unwrap();
        tape.backward(loss).unwrap();
        assert!(matches!(tape.backward(loss), Err(Error::Usage(_))));
    }

    #[test]
    fn inference_tape_rejects_backward() {
        let p = Parameter::new("p", Tensor::scalar(1.0f64));
        let mut tape = Tape::inference();
        let v = tape.param(&p).unwrap();
        let loss = tape.sum_squares(v).unwrap();
        assert!(matches!(tape.backward(loss), Err(Error::Usage(_))));
    }

    #[test]
    fn backward_visits_in_reverse_recording_order() {
        let p = Parameter::new("p", Tensor::vector(vec![0.5f64, -1.5]));
        let mut tape = Tape::new();
        let v = tape.param(&p).unwrap();
        let r = tape.relu(v).unwrap();
        let s = tape.scale(r, 3.0).unwrap();
        let loss = tape.sum_squares(s).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.visit_order(), &[3, 2, 1, 0]);
    }

    #[test]
    fn frozen_parameter_gets_no_gradient() {
        let mut p = Parameter::new("p", Tensor::vector(vec![1.0f64, 2.0]));
        p.requires_grad = false;
        let q = Parameter::new("q", Tensor::vector(vec![1.0f64, 1.0]));
        let mut tape = Tape::new();
        let (vp, vq) = (tape.param(&p).unwrap(), tape.param(&q).unwrap());
        let s = tape.add(vp, vq).unwrap();
        let loss = tape.sum_squares(s).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(p.key()).is_none());
        assert_eq!(grads.get(q.key()).unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn ste_passes_gradient_through() {
        let p = Parameter::new("p", Tensor::vector(vec![0.3f64, -0.2, 0.0]));
        let mut tape = Tape::new();
        let v = tape.param(&p).unwrap();
        let b = tape.binarize_ste(v).unwrap();
        assert_eq!(tape.value(b).data(), &[1.0, -1.0, 1.0]);
        let w = tape
            .constant(Tensor::vector(vec![0.25, -4.0, 7.0]))
            .unwrap();
        let prod = tape.sub(b, w).unwrap();
        let loss = tape.sum_squares(prod).unwrap();
        let grads = tape.backward(loss).unwrap();
        // upstream gradient 2(b − w) arrives unchanged at the latent
        assert_eq!(grads.get(p.key()).unwrap().data(), &[1.5, 6.0, -12.0]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut tape = Tape::<f64>::new();
        let v = tape.constant(Tensor::scalar(1e200)).unwrap();
        assert!(matches!(
            tape.sum_squares(v),
            Err(Error::NonFinite("sum_squares"))
        ));
    }
}
