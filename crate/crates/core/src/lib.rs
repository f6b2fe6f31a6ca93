//! Single-pixel camera simulation with learnable coded apertures, an
//! ADMM-unrolled reconstruction network, and knowledge distillation from a
//! lightly constrained teacher camera into a binary, few-snapshot student.

pub mod cli;
pub mod data;
pub mod distill;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod recovery;
pub mod sensing;
pub mod system;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
