//! Training, the two evaluation protocols, reports and prediction.
//!
//! Evaluation runs one inference pass per split. The single-chunk protocol
//! scores each chunk's argmax; the track protocol folds the same outputs by
//! majority vote, breaking ties by summed probability, then lowest index.

mod checkpoint;
mod config;
pub mod data;
mod eval;
mod predict;
mod report;
mod train;

pub use checkpoint::{Checkpoint, CheckpointHeader};
pub use config::{Precision, TrainConfig};
pub use data::{
    prepare_examples, slice_files, slice_manifest, slice_recording, ChunkDataset, DatasetSummary, Example,
    LabeledChunk, NegativePolicy, SliceConfig,
};
pub use eval::{
    argmax, eval_chunks, eval_tracks, evaluate, predict_examples, predict_split, vote, ChunkPrediction,
    ConfusionMatrix, EvalReport, Protocol, Vote, CLASSES,
};
pub use predict::{predict, predictions_jsonl, ChunkDistribution, TrackPrediction};
pub use report::{confusion_csv, parse_confusion_csv, render_report};
pub use train::{class_weights, fit_steps, train, EpochLog, TrainOutcome};

/// Failures specific to training and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("loss diverged at epoch {epoch}, step {step}: {detail}")]
    DivergedLoss { epoch: usize, step: u64, detail: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("report: {0}")]
    Report(String),
}
