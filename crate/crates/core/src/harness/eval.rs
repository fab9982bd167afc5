//! Chunk predictions, majority voting and the two evaluation protocols.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{prepare_examples, ChunkDataset, Example};
use super::{Checkpoint, HarnessError, Precision};
use crate::codec::ClassLabel;
use crate::error::Result;
use crate::model::PointClassifier;
use crate::nn::{softmax, ModelParams, Real, Tensor};

pub const CLASSES: usize = ClassLabel::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Chunk,
    Track,
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "chunk" => Ok(Protocol::Chunk),
            "track" => Ok(Protocol::Track),
            other => Err(format!("unknown protocol {other:?} (expected chunk or track)")),
        }
    }
}

/// Softmax output for one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPrediction {
    pub chunk_id: u64,
    pub track: (String, u64),
    pub label: usize,
    pub probs: [f64; CLASSES],
}

impl ChunkPrediction {
    pub fn predicted(&self) -> usize {
        argmax(&self.probs)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Rows are truth, columns predictions, both in class-index order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; CLASSES]; CLASSES]);

impl ConfusionMatrix {
    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.0[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..CLASSES).map(|i| self.0[i][i]).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.0[truth].iter().sum()
    }

    /// `trace / total`, 0 when empty.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    /// Per-class recall; `None` for classes without examples.
    pub fn recall(&self) -> [Option<f64>; CLASSES] {
        std::array::from_fn(|c| match self.row_sum(c) {
            0 => None,
            n => Some(self.0[c][c] as f64 / n as f64),
        })
    }
}

/// Outcome of a majority vote over one track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub class: usize,
    /// Whether several classes shared the top count.
    pub tied: bool,
    /// Mean probability of the chosen class over the track's chunks.
    pub confidence: f64,
}

/// Modal predicted class; ties go to the larger summed probability, then the
/// lower class index. An empty track votes background with no confidence.
pub fn vote(chunks: &[[f64; CLASSES]]) -> Vote {
    let mut counts = [0usize; CLASSES];
    let mut sums = [0.0f64; CLASSES];
    for p in chunks {
        counts[argmax(p)] += 1;
        for (s, &v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }
    let top = *counts.iter().max().expect("non-empty class list");
    let tied: Vec<usize> = (0..CLASSES).filter(|&c| counts[c] == top).collect();
    let mut class = tied[0];
    for &c in &tied[1..] {
        if sums[c] > sums[class] {
            class = c;
        }
    }
    Vote {
        class,
        tied: !chunks.is_empty() && tied.len() > 1,
        confidence: if chunks.is_empty() { 0.0 } else { sums[class] / chunks.len() as f64 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub chunk_accuracy: f64,
    pub track_accuracy: f64,
    /// Recall per class of the protocol's matrix.
    pub per_class_recall: [Option<f64>; CLASSES],
    pub chunk_confusion: ConfusionMatrix,
    pub track_confusion: ConfusionMatrix,
    pub chunks: u64,
    pub tracks: u64,
    pub dropped_chunks: u64,
    pub tied_tracks: u64,
}

impl EvalReport {
    /// Matrix of the report's protocol.
    pub fn confusion(&self) -> &ConfusionMatrix {
        match self.protocol {
            Protocol::Chunk => &self.chunk_confusion,
            Protocol::Track => &self.track_confusion,
        }
    }

    pub fn accuracy(&self) -> f64 {
        self.confusion().accuracy()
    }
}

/// Track key -> (truth, chunk distributions).
type TrackVotes<'a> = BTreeMap<&'a (String, u64), (usize, Vec<[f64; CLASSES]>)>;

/// Folds chunk predictions into both protocols' matrices. Tracks are voted
/// in key order; a track's truth is the label of its chunks.
pub fn evaluate(predictions: &[ChunkPrediction], protocol: Protocol, dropped_chunks: u64) -> Result<EvalReport, HarnessError> {
    let mut chunk_confusion = ConfusionMatrix::default();
    let mut by_track: TrackVotes<'_> = BTreeMap::new();
    for p in predictions {
        chunk_confusion.add(p.label, p.predicted());
        let entry = by_track.entry(&p.track).or_insert((p.label, Vec::new()));
        if entry.0 != p.label {
            return Err(HarnessError::Manifest(format!(
                "track {:?} mixes labels {} and {}",
                p.track, entry.0, p.label
            )));
        }
        entry.1.push(p.probs);
    }
    let mut track_confusion = ConfusionMatrix::default();
    let mut tied_tracks = 0;
    for (label, probs) in by_track.values() {
        let v = vote(probs);
        tied_tracks += v.tied as u64;
        track_confusion.add(*label, v.class);
    }
    let matrix = match protocol {
        Protocol::Chunk => &chunk_confusion,
        Protocol::Track => &track_confusion,
    };
    Ok(EvalReport {
        protocol,
        chunk_accuracy: chunk_confusion.accuracy(),
        track_accuracy: track_confusion.accuracy(),
        per_class_recall: matrix.recall(),
        chunk_confusion,
        track_confusion,
        chunks: predictions.len() as u64,
        tracks: by_track.len() as u64,
        dropped_chunks,
        tied_tracks,
    })
}

fn probabilities<T: Real>(
    model: &PointClassifier,
    weights: &[Tensor<T>],
    examples: &[Example],
) -> Result<Vec<ChunkPrediction>> {
    examples
        .par_iter()
        .map(|ex| {
            let logits = model.logits(weights, &ex.points, ex.chunk_id)?;
            let p = softmax(&logits);
            Ok(ChunkPrediction {
                chunk_id: ex.chunk_id,
                track: ex.track.clone(),
                label: ex.label,
                probs: std::array::from_fn(|i| p[i]),
            })
        })
        .collect()
}

/// Runs the model over prepared examples, in input order.
pub fn predict_examples(
    model: &PointClassifier,
    params: &ModelParams,
    examples: &[Example],
    precision: Precision,
) -> Result<Vec<ChunkPrediction>> {
    match precision {
        Precision::F32 => probabilities(model, &params.cast::<f32>(), examples),
        Precision::F64 => probabilities(model, &params.cast::<f64>(), examples),
    }
}

/// One inference pass over a split; both protocols fold the same outputs.
pub fn predict_split(checkpoint: &Checkpoint, dataset: &ChunkDataset, split: &str) -> Result<Vec<ChunkPrediction>> {
    let model = checkpoint.model()?;
    let h = &checkpoint.header;
    if dataset.summary.delta_us != h.delta_us {
        return Err(HarnessError::CheckpointMismatch(format!(
            "checkpoint expects {} us chunks, dataset has {} us",
            h.delta_us, dataset.summary.delta_us
        ))
        .into());
    }
    let chunks = dataset.split(split);
    let examples = prepare_examples(&chunks, &h.sampling)?;
    predict_examples(&model, &checkpoint.params, &examples, Precision::F64)
}

pub fn eval_chunks(checkpoint: &Checkpoint, dataset: &ChunkDataset, split: &str) -> Result<EvalReport> {
    let preds = predict_split(checkpoint, dataset, split)?;
    Ok(evaluate(&preds, Protocol::Chunk, dataset.dropped_in(split))?)
}

pub fn eval_tracks(checkpoint: &Checkpoint, dataset: &ChunkDataset, split: &str) -> Result<EvalReport> {
    let preds = predict_split(checkpoint, dataset, split)?;
    Ok(evaluate(&preds, Protocol::Track, dataset.dropped_in(split))?)
}
