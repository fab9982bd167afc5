//! Point-set encoders and the classification head.
//!
//! Two encoders share one head:
//!
//! * **flat**: a shared per-point MLP followed by a max pool over points;
//! * **hierarchical**: set-abstraction levels (farthest-point centroids, ball
//!   query grouping, shared MLP over each group, per-group max pool) and a
//!   final global max pool.
//!
//! The head is a stack of ReLU layers and a final linear map to one logit
//! per class, in [`ClassLabel`](crate::ClassLabel) index order.

mod classifier;
mod config;
mod grouping;

pub use classifier::{classify, encode_flat, encode_hierarchical, ExampleGrad, PointClassifier};
pub use config::{EncoderConfig, SaLevel, Variant, COORD_DIM, POINT_DIM};
pub use grouping::{ball_query, canonical_order};

use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("parameters do not match the encoder config: {0}")]
    ParamMismatch(String),
    #[error("encoder needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
}
