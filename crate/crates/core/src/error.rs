use crate::codec::{AnnotationError, CodecError};
use crate::harness::HarnessError;
use crate::model::ModelError;
use crate::nn::{CheckpointError, NnError};
use crate::sampling::SamplingError;
use crate::synth::SynthError;
use crate::track::TrackError;

/// Any error raised by the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Whether the failure is a numeric divergence rather than bad data.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Harness(HarnessError::DivergedLoss { .. }))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
