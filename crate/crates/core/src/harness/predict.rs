use serde::{Deserialize, Serialize};

use super::eval::{predict_examples, vote, CLASSES};
use super::{Checkpoint, Precision};
use crate::codec::{AnnotationSet, ClassLabel, EventStream};
use crate::error::Result;
use crate::rng::derive_seed;
use crate::track::{assemble_tracks, chunk_track, normalize_chunk, ChunkSpec};

use super::data::Example;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkDistribution {
    pub t0_us: u64,
    /// Softmax output in class-index order.
    pub distribution: [f64; CLASSES],
}

/// One output line of `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPrediction {
    pub track_id: u64,
    pub class: ClassLabel,
    pub confidence: f64,
    pub chunks: Vec<ChunkDistribution>,
}

/// Classifies every valid annotated track of a recording by majority vote.
/// Tracks whose chunks all fall under the event floor are reported as
/// background with zero confidence.
pub fn predict(checkpoint: &Checkpoint, stream: &EventStream, ann: &AnnotationSet) -> Result<Vec<TrackPrediction>> {
    let model = checkpoint.model()?;
    let h = &checkpoint.header;
    let spec = ChunkSpec {
        delta_us: h.delta_us as i64,
        min_events: h.min_events,
    };
    let assembly = assemble_tracks(stream, ann)?;
    let mut examples = Vec::new();
    let mut owners = Vec::new();
    for (k, track) in assembly.tracks.iter().enumerate() {
        for chunk in chunk_track(track, &spec)?.chunks {
            let salt = derive_seed(track.track_id, 0x5052, chunk.t0);
            let points = h.sampling.apply(&normalize_chunk(&chunk)?, salt)?;
            examples.push(Example {
                chunk_id: salt,
                track: (String::new(), track.track_id),
                label: track.class_label.index(),
                points,
            });
            owners.push((k, chunk.t0));
        }
    }
    let preds = predict_examples(&model, &checkpoint.params, &examples, Precision::F64)?;
    let mut out: Vec<TrackPrediction> = assembly
        .tracks
        .iter()
        .map(|t| TrackPrediction {
            track_id: t.track_id,
            class: ClassLabel::Background,
            confidence: 0.0,
            chunks: Vec::new(),
        })
        .collect();
    for (p, &(k, t0)) in preds.iter().zip(&owners) {
        out[k].chunks.push(ChunkDistribution {
            t0_us: t0,
            distribution: p.probs,
        });
    }
    for t in &mut out {
        let dists: Vec<[f64; CLASSES]> = t.chunks.iter().map(|c| c.distribution).collect();
        let v = vote(&dists);
        t.class = ClassLabel::from_index(v.class).expect("vote returns a class index");
        t.confidence = v.confidence;
    }
    Ok(out)
}

/// JSON lines, one track per line.
pub fn predictions_jsonl(preds: &[TrackPrediction]) -> String {
    preds
        .iter()
        .map(|p| serde_json::to_string(p).expect("predictions serialize") + "\n")
        .collect()
}
