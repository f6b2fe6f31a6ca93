//! Distillation losses: RBF stage-correlation congruence plus imitation.
//!
//! For one scene, the `L` per-stage features of a system form the rows of a
//! feature matrix. Its Gaussian-kernel Gram matrix (`L×L`) summarizes how the
//! features evolve across stages; the student matches the teacher's Gram
//! matrix in Frobenius norm and the teacher's final reconstruction in squared
//! Euclidean norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Real, Tape, Tensor, Var};
use crate::recovery::{ReconstructionTrace, TraceVars};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Soft-threshold outputs `f^k` inside each proximal step.
    #[default]
    Sparse,
    /// Stage outputs `x^k`.
    NonSparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    /// Kernel coefficient `1/(2σ²)`.
    pub inv_two_sigma_sq: f64,
    pub feature_kind: FeatureKind,
    pub cc_weight: f64,
    pub im_weight: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            inv_two_sigma_sq: 1e-6,
            feature_kind: FeatureKind::Sparse,
            cc_weight: 1.0,
            im_weight: 1.0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inv_two_sigma_sq > 0.0 && self.inv_two_sigma_sq.is_finite()) {
            return Err(Error::config(
                "inv_two_sigma_sq must be positive and finite",
            ));
        }
        Ok(())
    }
}

/// One row per stage.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    pub rows: Vec<Tensor<T>>,
    pub kind: FeatureKind,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn num_stages(&self) -> usize {
        self.rows.len()
    }

    /// Same rows in a different stage order: row `i` becomes `rows[order[i]]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        FeatureMatrix {
            rows: order.iter().map(|&i| self.rows[i].clone()).collect(),
            kind: self.kind,
        }
    }
}

pub fn extract_features<T: Real>(
    trace: &ReconstructionTrace<T>,
    kind: FeatureKind,
) -> FeatureMatrix<T> {
    let rows = match kind {
        FeatureKind::Sparse => trace.sparse_codes.clone(),
        FeatureKind::NonSparse => trace.x_stages.clone(),
    };
    FeatureMatrix { rows, kind }
}

fn squared_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// `η[i,j] = exp(−coef·‖f_i − f_j‖²)`.
pub fn rbf_correlation<T: Real>(
    features: &FeatureMatrix<T>,
    inv_two_sigma_sq: f64,
) -> Result<Tensor<T>> {
    if !(inv_two_sigma_sq > 0.0) {
        return Err(Error::config("inv_two_sigma_sq must be positive"));
    }
    let l = features.rows.len();
    if l == 0 {
        return Err(Error::shape("feature matrix has no rows"));
    }
    let n = features.rows[0].len();
    if features.rows.iter().any(|r| r.len() != n) {
        return Err(Error::shape("feature rows differ in length"));
    }
    let coef = T::of(inv_two_sigma_sq);
    let mut eta = vec![T::one(); l * l];
    for i in 0..l {
        for j in (i + 1)..l {
            let d2 = squared_distance(features.rows[i].data(), features.rows[j].data());
            let e = (-coef * d2).exp();
            eta[i * l + j] = e;
            eta[j * l + i] = e;
        }
    }
    Tensor::new([l, l], eta)
}

/// `‖η(F_t) − η(F_s)‖_F`.
pub fn cc_loss<T: Real>(
    teacher: &FeatureMatrix<T>,
    student: &FeatureMatrix<T>,
    config: &DistillConfig,
) -> Result<T> {
    if teacher.num_stages() != student.num_stages() {
        return Err(Error::shape(format!(
            "teacher has {} stages, student {}",
            teacher.num_stages(),
            student.num_stages()
        )));
    }
    let et = rbf_correlation(teacher, config.inv_two_sigma_sq)?;
    let es = rbf_correlation(student, config.inv_two_sigma_sq)?;
    Ok(squared_distance(et.data(), es.data()).sqrt())
}

/// `‖x_s − x_t‖²`.
pub fn imitation_loss<T: Real>(student: &Tensor<T>, teacher: &Tensor<T>) -> Result<T> {
    if student.len() != teacher.len() {
        return Err(Error::shape(format!(
            "reconstructions differ in length: {} vs {}",
            student.len(),
            teacher.len()
        )));
    }
    Ok(squared_distance(student.data(), teacher.data()))
}

/// Weighted CC + imitation loss of one scene.
pub fn kd_sample_loss<T: Real>(
    student: &ReconstructionTrace<T>,
    teacher: &ReconstructionTrace<T>,
    config: &DistillConfig,
) -> Result<T> {
    let cc = cc_loss(
        &extract_features(teacher, config.feature_kind),
        &extract_features(student, config.feature_kind),
        config,
    )?;
    let im = imitation_loss(student.output(), teacher.output())?;
    Ok(T::of(config.cc_weight) * cc + T::of(config.im_weight) * im)
}

/// Batch mean of [`kd_sample_loss`], reduced in sample order.
pub fn kd_loss<T: Real>(
    students: &[ReconstructionTrace<T>],
    teachers: &[ReconstructionTrace<T>],
    config: &DistillConfig,
) -> Result<T> {
    if students.len() != teachers.len() || students.is_empty() {
        return Err(Error::shape(
            "kd_loss needs equally many (>= 1) student and teacher traces",
        ));
    }
    let mut total = T::zero();
    for (s, t) in students.iter().zip(teachers) {
        total = total + kd_sample_loss(s, t, config)?;
    }
    Ok(total / T::of(students.len() as f64))
}

/// What the student needs from a frozen teacher for one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherTargets<T> {
    /// Teacher Gram matrix `η(F_t)`, `[L, L]`.
    pub gram: Tensor<T>,
    /// Teacher reconstruction `x_t^L`.
    pub output: Tensor<T>,
}

impl<T: Real> TeacherTargets<T> {
    pub fn from_trace(trace: &ReconstructionTrace<T>, config: &DistillConfig) -> Result<Self> {
        Ok(TeacherTargets {
            gram: rbf_correlation(
                &extract_features(trace, config.feature_kind),
                config.inv_two_sigma_sq,
            )?,
            output: trace.output().clone(),
        })
    }
}

/// Records the KD loss of one scene against constant teacher targets.
pub fn record_kd_loss<T: Real>(
    tape: &mut Tape<T>,
    student: &TraceVars,
    teacher: &TeacherTargets<T>,
    config: &DistillConfig,
) -> Result<Var> {
    let rows = match config.feature_kind {
        FeatureKind::Sparse => student.codes(),
        FeatureKind::NonSparse => student.iterates(),
    };
    if teacher.gram.shape() != [rows.len(), rows.len()] {
        return Err(Error::shape(format!(
            "teacher correlation is {:?}, student has {} stages",
            teacher.gram.shape(),
            rows.len()
        )));
    }
    let gram_s = tape.rbf_gram(&rows, T::of(config.inv_two_sigma_sq))?;
    let gram_t = tape.constant(teacher.gram.clone())?;
    let diff = tape.sub(gram_t, gram_s)?;
    let cc = tape.norm(diff)?;

    let target = tape.constant(teacher.output.clone())?;
    let gap = tape.sub(student.output(), target)?;
    let im = tape.sum_squares(gap)?;

    let cc = tape.scale(cc, T::of(config.cc_weight))?;
    let im = tape.scale(im, T::of(config.im_weight))?;
    tape.add(cc, im)
}
