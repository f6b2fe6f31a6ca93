use std::sync::atomic::{AtomicU64, Ordering};

use super::Real;
use crate::error::{Error, Result};

/// Dense row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// One-dimensional tensor owning `data`.
    pub fn vector(data: Vec<T>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.expect_same_len(other, "dot")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    /// Accumulated in f64 with Neumaier compensation, so loss values carry
    /// close to full precision regardless of length.
    pub fn squared_norm(&self) -> T {
        T::of(compensated_sum(self.data.iter().map(|v| {
            let v = v.as_f64();
            v * v
        })))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-type conversion, e.g. f32 checkpoint weights into an f64 model.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub(crate) fn expect_same_len(&self, other: &Self, what: &str) -> Result<()> {
        if self.data.len() != other.data.len() {
            return Err(Error::shape(format!(
                "{what}: length {} vs {}",
                self.data.len(),
                other.data.len()
            )));
        }
        Ok(())
    }
}

static NEXT_PARAM_KEY: AtomicU64 = AtomicU64::new(1);

/// Identity of a [`Parameter`] on a compute tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamKey(u64);

impl ParamKey {
    fn fresh() -> Self {
        ParamKey(NEXT_PARAM_KEY.fetch_add(1, Ordering::Relaxed))
    }
}

/// A learnable tensor with its accumulated gradient.
///
/// Every parameter carries a process-unique key; cloning issues a new key so
/// that gradients never leak between copies.
#[derive(Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub gradient: Tensor<T>,
    pub requires_grad: bool,
    key: ParamKey,
    has_grad: bool,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let gradient = Tensor::zeros(value.shape().to_vec());
        Parameter {
            name: name.into(),
            value,
            gradient,
            requires_grad: true,
            key: ParamKey::fresh(),
            has_grad: false,
        }
    }

    pub fn key(&self) -> ParamKey {
        self.key
    }

    pub fn zero_grad(&mut self) {
        self.gradient
            .data_mut()
            .iter_mut()
            .for_each(|g| *g = T::zero());
        self.has_grad = false;
    }

    /// Adds this parameter's share of `grads`. Parameters absent from the
    /// tape keep their current (zero) gradient.
    pub fn accumulate(&mut self, grads: &super::Gradients<T>) {
        self.has_grad = true;
        if let Some(g) = grads.get(self.key) {
            for (acc, &v) in self.gradient.data_mut().iter_mut().zip(g.data()) {
                *acc = *acc + v;
            }
        }
    }

    /// Adds a raw gradient buffer of matching length.
    pub fn accumulate_raw(&mut self, g: &[T]) {
        self.has_grad = true;
        for (acc, &v) in self.gradient.data_mut().iter_mut().zip(g) {
            *acc = *acc + v;
        }
    }

    /// True once a backward pass has been folded in since the last zero-grad.
    pub fn has_grad(&self) -> bool {
        self.has_grad
    }

    pub fn cast<U: Real>(&self) -> Parameter<U> {
        let mut p = Parameter::new(self.name.clone(), self.value.cast());
        p.requires_grad = self.requires_grad;
        p
    }
}

impl<T: Real> Clone for Parameter<T> {
    fn clone(&self) -> Self {
        Parameter {
            name: self.name.clone(),
            value: self.value.clone(),
            gradient: self.gradient.clone(),
            requires_grad: self.requires_grad,
            key: ParamKey::fresh(),
            has_grad: self.has_grad,
        }
    }
}

/// Anything that owns an ordered list of parameters.
pub trait HasParams<T: Real> {
    fn params(&self) -> Vec<&Parameter<T>>;
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn accumulate(&mut self, grads: &super::Gradients<T>) {
        for p in self.params_mut() {
            p.accumulate(grads);
        }
    }

    fn set_requires_grad(&mut self, flag: bool) {
        for p in self.params_mut() {
            p.requires_grad = flag;
        }
    }

    fn num_scalars(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::<f32>::new([2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::<f32>::new([2, 3], vec![0.0; 5]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn clone_gets_fresh_key() {
        let p = Parameter::new("w", Tensor::<f64>::scalar(1.0));
        let q = p.clone();
        assert_ne!(p.key(), q.key());
        assert_eq!(p.value, q.value);
    }

    #[test]
    fn zero_grad_clears() {
        let mut p = Parameter::new("w", Tensor::<f64>::vector(vec![1.0, 2.0]));
        p.accumulate_raw(&[3.0, 4.0]);
        assert!(p.has_grad());
        p.zero_grad();
        assert_eq!(p.gradient.data(), &[0.0, 0.0]);
        assert!(!p.has_grad());
        assert_eq!(p.gradient.shape(), p.value.shape());
    }
}
