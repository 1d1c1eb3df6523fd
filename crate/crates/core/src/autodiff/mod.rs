//! Minimal reverse-mode automatic differentiation over dense f64 arrays.
//!
//! A [`Tape`] records every operation as it is evaluated. Operands always
//! precede their results, so a single reverse pass over the tape visits
//! nodes in a valid topological order. Broadcasting is limited to adding a
//! bias vector to every row of a matrix.

mod gradcheck;
mod tape;
mod tensor;

use thiserror::Error;

pub use gradcheck::{grad_check, grad_check_many};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not fit {len} elements")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("kernel of width {kernel} does not fit a sequence of length {len}")]
    KernelTooLarge { kernel: usize, len: usize },
    #[error("pool size {pool} invalid for length {len}")]
    PoolOutOfRange { pool: usize, len: usize },
    #[error("loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, AutodiffError>;
