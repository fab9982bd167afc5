use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Precision, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{EncoderConfig, PointClassifier};
use crate::nn::{decode_checkpoint, encode_checkpoint, ModelParams};
use crate::sampling::SamplingSpec;

/// JSON header stored in front of the tensors: everything evaluation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub encoder: EncoderConfig,
    pub sampling: SamplingSpec,
    pub delta_us: u64,
    pub min_events: usize,
    pub precision: Precision,
    /// Epoch (1-based) the weights were taken from.
    pub epoch: usize,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, params: ModelParams, epoch: usize, val_accuracy: f64) -> Self {
        Self {
            header: CheckpointHeader {
                encoder: config.encoder.clone(),
                sampling: config.sampling,
                delta_us: config.delta_us,
                min_events: config.min_events,
                precision: config.precision,
                epoch,
                val_accuracy,
            },
            params,
        }
    }

    pub fn model(&self) -> Result<PointClassifier> {
        let model = PointClassifier::new(self.header.encoder.clone())?;
        model
            .check_params(&self.params)
            .map_err(|e| HarnessError::CheckpointMismatch(e.to_string()))?;
        Ok(model)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_string(&self.header).expect("header serializes");
        encode_checkpoint(&header, &self.params)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, params) = decode_checkpoint(bytes)?;
        let header: CheckpointHeader = serde_json::from_str(&header)
            .map_err(|e| HarnessError::CheckpointMismatch(format!("header: {e}")))?;
        let ckpt = Self { header, params };
        ckpt.model()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
