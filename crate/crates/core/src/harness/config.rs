use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::codec::FRAME_US;
use crate::model::{EncoderConfig, Variant};
use crate::nn::Adam;
use crate::sampling::{SamplingSpec, Strategy};
use crate::track::DEFAULT_MIN_EVENTS;

/// Floating-point width of training arithmetic. Master weights stay `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub sampling: SamplingSpec,
    pub delta_us: u64,
    pub min_events: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight each class inversely to its share of the training chunks.
    pub class_weighting: bool,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = Adam::default();
        Self {
            encoder: EncoderConfig::flat(),
            sampling: SamplingSpec::new(Strategy::MostRecent, 1024, 0),
            delta_us: FRAME_US,
            min_events: DEFAULT_MIN_EVENTS,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            batch_size: 32,
            epochs: 8,
            class_weighting: true,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            encoder: EncoderConfig::default_for(variant),
            ..Self::default()
        }
    }

    pub fn adam(&self) -> Adam {
        Adam {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        self.encoder
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        if self.sampling.target_n == 0 {
            return bad("sampling.target_n must be at least 1");
        }
        if self.sampling.target_n < self.encoder.min_points() {
            return bad("sampling.target_n is below the encoder's minimum point count");
        }
        if !(self.sampling.time_weight.is_finite() && self.sampling.time_weight >= 0.0) {
            return bad("sampling.time_weight must be non-negative");
        }
        if self.delta_us == 0 || !FRAME_US.is_multiple_of(self.delta_us) {
            return bad("delta_us must divide the 33000 us annotation frame");
        }
        if !(self.lr > 0.0 && self.eps > 0.0 && (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("optimizer needs lr > 0, eps > 0 and betas in [0, 1)");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.lr, c.beta1, c.beta2, c.eps), (1e-3, 0.9, 0.999, 1e-8));
        assert_eq!(c.batch_size, 32);
        assert_eq!(c.delta_us, 33_000);
    }

    #[test]
    fn json_overrides_merge_with_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "sampling": {"strategy": "fps", "target_n": 512, "seed": 1}}"#).unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.sampling.strategy, Strategy::Fps);
        assert_eq!(c.batch_size, 32);
    }

    #[test]
    fn rejects_bad_delta() {
        let c = TrainConfig {
            delta_us: 10_000,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
