//! Dense tensors, a reverse-mode tape for the recovery network's operator
//! set, and a finite-difference gradient oracle.

mod gradcheck;
pub mod kernels;
mod scalar;
mod tape;
mod tensor;

pub use gradcheck::{
    analytic_gradient, compare, finite_diff_check, numeric_gradient, relative_error,
    GradCheckReport, NumericGradient, ParamCheck,
};
pub use kernels::{band_matvec, binary_sign, conv2d_same, soft, soft_threshold};
pub use scalar::Real;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{HasParams, ParamKey, Parameter, Tensor};
