//! Dense float64 tensors, reverse-mode differentiation, LU-based linear
//! algebra and the Adam optimiser.

mod adam;
mod gradcheck;
pub mod linalg;
mod params;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use linalg::{inverse_and_logdet, lu_decompose, LuFactors};
pub use params::{BoundParams, ParamId, ParamStore};
pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: expected a matrix, got shape {shape:?}")]
    NotMatrix { op: &'static str, shape: Vec<usize> },
    #[error("{op}: expected a square matrix, got shape {shape:?}")]
    NotSquare { op: &'static str, shape: Vec<usize> },
    #[error("{op}: range {start}..{end} out of bounds for length {len}")]
    OutOfRange {
        op: &'static str,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("singular matrix: pivot {pivot:e} in column {column} (max |A| = {scale:e})")]
    SingularMatrix { column: usize, pivot: f64, scale: f64 },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("parameter {name}: expected shape {expected:?}, got {actual:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
}
