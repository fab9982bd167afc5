use rand::Rng;

use super::{NnError, Real, Tensor};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor<f64>,
    pub grad: Option<Vec<f64>>,
}

/// Named `f64` parameters with optimizer state.
///
/// `step` counts optimizer updates; `moments` holds Adam's first and second
/// moment estimates once the first update has run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    entries: Vec<ParamEntry>,
    /// Seed the weights were initialized from.
    pub init_seed: u64,
    pub step: u64,
    pub moments: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl ModelParams {
    pub fn new(init_seed: u64) -> Self {
        Self {
            init_seed,
            ..Self::default()
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor<f64>) -> usize {
        self.entries.push(ParamEntry {
            name: name.into(),
            value,
            grad: None,
        });
        self.entries.len() - 1
    }

    /// Adds `{prefix}.weight [d_in, d_out]` (He-uniform) and
    /// `{prefix}.bias [d_out]` (zeros).
    pub fn push_linear(&mut self, prefix: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) {
        let bound = (6.0 / d_in as f64).sqrt();
        let w = (0..d_in * d_out).map(|_| rng.gen_range(-bound..bound)).collect();
        self.push(format!("{prefix}.weight"), Tensor::new(vec![d_in, d_out], w).expect("sized"));
        self.push(format!("{prefix}.bias"), Tensor::zeros(vec![d_out]));
    }

    /// Convenience for building a fresh set with one seeded generator.
    pub fn with_rng<F: FnOnce(&mut Self, &mut rand_chacha::ChaCha8Rng)>(init_seed: u64, build: F) -> Self {
        let mut p = Self::new(init_seed);
        let mut rng = rng_from_seed(init_seed);
        build(&mut p, &mut rng);
        p
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<f64>, NnError> {
        self.index_of(name)
            .map(|i| &self.entries[i].value)
            .ok_or_else(|| NnError::UnknownParam { name: name.to_string() })
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<f64>, NnError> {
        match self.index_of(name) {
            Some(i) => Ok(&mut self.entries[i].value),
            None => Err(NnError::UnknownParam { name: name.to_string() }),
        }
    }

    pub fn value_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// All values converted to the compute precision.
    pub fn cast<T: Real>(&self) -> Vec<Tensor<T>> {
        self.entries.iter().map(|e| e.value.cast()).collect()
    }

    pub fn clear_grads(&mut self) {
        self.entries.iter_mut().for_each(|e| e.grad = None);
    }

    /// Sets every gradient, in entry order.
    pub fn set_grads(&mut self, grads: Vec<Vec<f64>>) -> Result<(), NnError> {
        if grads.len() != self.entries.len() {
            return Err(NnError::ShapeMismatch {
                op: "set_grads",
                expected: format!("{} gradients", self.entries.len()),
                got: vec![grads.len()],
            });
        }
        for (e, g) in self.entries.iter_mut().zip(grads) {
            if g.len() != e.value.len() {
                return Err(NnError::ShapeMismatch {
                    op: "set_grads",
                    expected: format!("{} values for {}", e.value.len(), e.name),
                    got: vec![g.len()],
                });
            }
            e.grad = Some(g);
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.value.all_finite())
    }

    /// Same names and shapes, in the same order.
    pub fn same_layout(&self, other: &ModelParams) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.value.shape() == b.value.shape())
    }
}
