use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::codec::ClassLabel;

/// Width of one input point: `(x, y, t, p)`.
pub const POINT_DIM: usize = 4;
/// Width of the geometric part used for FPS and grouping: `(x, y, t)`.
pub const COORD_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Flat,
    Hierarchical,
}

/// One set-abstraction level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaLevel {
    /// Centroids kept by FPS (clamped to the number of input points).
    pub centroids: usize,
    /// Ball-query radius in normalized units.
    pub radius: f64,
    pub group_size: usize,
    /// Output widths of the shared MLP; the input width is the previous
    /// feature width plus three relative coordinates.
    pub widths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub variant: Variant,
    /// Per-point MLP widths of the flat encoder.
    pub flat_widths: Vec<usize>,
    pub levels: Vec<SaLevel>,
    /// Hidden widths of the head; a final linear layer maps to `classes`.
    pub head_widths: Vec<usize>,
    pub classes: usize,
}

impl EncoderConfig {
    pub fn flat() -> Self {
        Self::default_for(Variant::Flat)
    }

    pub fn hierarchical() -> Self {
        Self::default_for(Variant::Hierarchical)
    }

    pub fn default_for(variant: Variant) -> Self {
        Self {
            variant,
            flat_widths: vec![64, 128, 256],
            levels: vec![
                SaLevel {
                    centroids: 128,
                    radius: 0.25,
                    group_size: 32,
                    widths: vec![64, 64, 128],
                },
                SaLevel {
                    centroids: 32,
                    radius: 0.5,
                    group_size: 16,
                    widths: vec![128, 128, 256],
                },
            ],
            head_widths: vec![128, 64, 32],
            classes: ClassLabel::COUNT,
        }
    }

    /// Width of the pooled global feature.
    pub fn feature_dim(&self) -> usize {
        match self.variant {
            Variant::Flat => *self.flat_widths.last().unwrap_or(&POINT_DIM),
            Variant::Hierarchical => self.levels.last().and_then(|l| l.widths.last()).copied().unwrap_or(POINT_DIM),
        }
    }

    /// Fewest points the encoder accepts.
    pub fn min_points(&self) -> usize {
        match self.variant {
            Variant::Flat => 1,
            Variant::Hierarchical => 2,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.classes < 2 {
            return bad(format!("{} classes", self.classes));
        }
        if self.head_widths.contains(&0) {
            return bad("zero head width".into());
        }
        match self.variant {
            Variant::Flat => {
                if self.flat_widths.is_empty() || self.flat_widths.contains(&0) {
                    return bad("flat widths must be non-empty and positive".into());
                }
            }
            Variant::Hierarchical => {
                if self.levels.is_empty() {
                    return bad("hierarchical encoder needs at least one level".into());
                }
                for (i, l) in self.levels.iter().enumerate() {
                    if l.centroids == 0 || l.group_size == 0 || l.widths.is_empty() || l.widths.contains(&0) {
                        return bad(format!("level {i} has a zero size"));
                    }
                    if !(l.radius > 0.0 && l.radius.is_finite()) {
                        return bad(format!("level {i} radius {}", l.radius));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let f = EncoderConfig::flat();
        f.validate().unwrap();
        assert_eq!(f.feature_dim(), 256);
        let h = EncoderConfig::hierarchical();
        h.validate().unwrap();
        assert_eq!(h.feature_dim(), 256);
        assert_eq!(h.levels[0].centroids, 128);
        assert_eq!(h.levels[1].group_size, 16);
    }

    #[test]
    fn zero_widths_are_invalid() {
        let mut f = EncoderConfig::flat();
        f.flat_widths[1] = 0;
        assert!(f.validate().is_err());
        let mut h = EncoderConfig::hierarchical();
        h.levels[0].radius = 0.0;
        assert!(h.validate().is_err());
    }
}
