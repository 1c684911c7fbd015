//! Dense 2-D tensors with tape-based reverse-mode differentiation.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_params, GradCheckReport};
pub use params::{BoundParams, ParamId, ParamSet};
pub use tape::{Gradients, PrimitiveOp, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op}: argument {value} outside the domain")]
    Domain { op: &'static str, value: f64 },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward needs a 1x1 output, got {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("gradient check hit a non-finite value at parameter {param}, index {index}")]
    GradCheckNonFinite { param: usize, index: usize },
    #[error("{0}")]
    InvalidArgument(String),
}
