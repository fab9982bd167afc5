//! A small dense-tensor engine with reverse-mode differentiation.
//!
//! Operations are recorded on a [`Graph`] tape as they run; [`Graph::backward`]
//! walks the tape in reverse and accumulates exact gradients. Only the layers
//! needed by point-set encoders exist: affine maps, ReLU, row and group max
//! pooling, row gathers, column concatenation, softmax and cross-entropy.
//!
//! Values are generic over [`Real`] (`f64` everywhere in tests, `f32` allowed
//! for training). Parameters live in [`ModelParams`] as `f64` master copies.

mod checkpoint;
mod graph;
mod optim;
mod params;
mod real;
mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use graph::{softmax, Graph, Var};
pub use optim::Adam;
pub use params::{ModelParams, ParamEntry};
pub use real::Real;
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NnError {
    #[error("{op}: shape mismatch, expected {expected}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: Vec<usize>,
    },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("parameter {name} has no gradient")]
    MissingGradient { name: String },
    #[error("unknown parameter {name}")]
    UnknownParam { name: String },
}

pub(crate) fn shape_err(op: &'static str, expected: impl Into<String>, got: &[usize]) -> NnError {
    NnError::ShapeMismatch {
        op,
        expected: expected.into(),
        got: got.to_vec(),
    }
}
