//! Chunk datasets on disk: slicing recordings and loading labeled chunks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::codec::{decode_events, read_annotations, AnnotationSet, ClassLabel, EventStream, FRAME_US};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sampling::SamplingSpec;
use crate::synth::{Manifest, MANIFEST_FILE, SPLITS};
use crate::track::{
    assemble_tracks, chunk_track, normalize_chunk, read_chunk_index, sample_negatives, write_chunk_files, Chunk,
    ChunkIndexEntry, ChunkSpec, NegativeConfig, NormalizedPointSet, DEFAULT_MIN_EVENTS,
};

pub const INDEX_FILE: &str = "chunks.jsonl";
pub const SUMMARY_FILE: &str = "dataset.json";

/// How many background chunks to draw with the negative sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativePolicy {
    /// One per object chunk, but only for recordings without annotated
    /// background tracks.
    #[default]
    Auto,
    /// This many per recording.
    Count(usize),
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceConfig {
    pub delta_us: u64,
    pub min_events: usize,
    pub negatives: NegativePolicy,
    pub seed: u64,
    /// Train, validation and test fractions for tracks without a manifest.
    pub split: [f64; 3],
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            delta_us: FRAME_US,
            min_events: DEFAULT_MIN_EVENTS,
            negatives: NegativePolicy::Auto,
            seed: 0,
            split: [0.70, 0.15, 0.15],
        }
    }
}

impl SliceConfig {
    fn chunk_spec(&self) -> ChunkSpec {
        ChunkSpec {
            delta_us: self.delta_us as i64,
            min_events: self.min_events,
        }
    }

    /// Seeded split of a track that has no manifest entry.
    pub fn hashed_split(&self, recording: &str, track_id: u64) -> &'static str {
        let name = recording.bytes().fold(0u64, |h, b| derive_seed(h, b as u64, 0));
        let u = (derive_seed(self.seed ^ name, 0x5350, track_id) >> 11) as f64 / (1u64 << 53) as f64;
        if u < self.split[0] {
            SPLITS[0]
        } else if u < self.split[0] + self.split[1] {
            SPLITS[1]
        } else {
            SPLITS[2]
        }
    }
}

/// Counts written to `dataset.json` next to the chunk index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub delta_us: u64,
    pub min_events: usize,
    pub recordings: Vec<String>,
    pub tracks: u64,
    pub rejected_tracks: u64,
    pub chunks: u64,
    pub negatives: u64,
    /// Chunks under the event floor, per split.
    pub dropped_chunks: BTreeMap<String, u64>,
}

/// Chunks of one recording with their split labels.
#[derive(Debug, Clone, Default)]
pub struct SlicedRecording {
    pub chunks: Vec<(Chunk, Option<String>)>,
    pub tracks: u64,
    pub rejected_tracks: u64,
    pub negatives: u64,
    pub dropped: BTreeMap<String, u64>,
}

/// Assembles, chunks and (optionally) adds negative chunks for one recording.
/// `split_of` names the split of each annotated track.
pub fn slice_recording(
    name: &str,
    stream: &EventStream,
    ann: &AnnotationSet,
    config: &SliceConfig,
    split_of: &dyn Fn(u64) -> Option<String>,
) -> Result<SlicedRecording> {
    let assembly = assemble_tracks(stream, ann)?;
    let spec = config.chunk_spec();
    let mut out = SlicedRecording {
        tracks: assembly.tracks.len() as u64,
        rejected_tracks: assembly.rejected.len() as u64,
        ..SlicedRecording::default()
    };
    let mut object_chunks = 0usize;
    for track in &assembly.tracks {
        let split = split_of(track.track_id);
        let chunking = chunk_track(track, &spec)?;
        *out.dropped.entry(split.clone().unwrap_or_default()).or_default() += chunking.dropped as u64;
        object_chunks += chunking.chunks.len();
        out.chunks.extend(chunking.chunks.into_iter().map(|c| (c, split.clone())));
    }
    let has_background = ann.tracks().any(|t| t.class_label == ClassLabel::Background);
    let count = match config.negatives {
        NegativePolicy::Auto if !has_background => object_chunks,
        NegativePolicy::Count(n) => n,
        _ => 0,
    };
    if count > 0 {
        let seed = derive_seed(config.seed, 0x4e47, name.bytes().fold(0, |h, b| derive_seed(h, b as u64, 1)));
        for chunk in sample_negatives(stream, ann, &NegativeConfig::new(count, seed))? {
            let split = Some(config.hashed_split(name, chunk.track_id).to_string());
            if chunk.events.len() < config.min_events.max(1) {
                *out.dropped.entry(split.clone().unwrap_or_default()).or_default() += 1;
                continue;
            }
            // negatives are single-frame; re-slice when the window is finer
            let parts = split_window(chunk, config.delta_us);
            for part in parts {
                if part.events.len() < config.min_events.max(1) {
                    *out.dropped.entry(split.clone().unwrap_or_default()).or_default() += 1;
                } else {
                    out.negatives += 1;
                    out.chunks.push((part, split.clone()));
                }
            }
        }
    }
    Ok(out)
}

fn split_window(chunk: Chunk, delta_us: u64) -> Vec<Chunk> {
    if delta_us >= chunk.delta_us {
        return vec![chunk];
    }
    (0..chunk.delta_us / delta_us)
        .map(|k| {
            let t0 = chunk.t0 + k * delta_us;
            Chunk {
                t0,
                delta_us,
                events: chunk.events.iter().filter(|e| e.t >= t0 && e.t < t0 + delta_us).copied().collect(),
                ..chunk.clone()
            }
        })
        .collect()
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes sliced recordings as a chunk dataset directory.
pub fn write_chunk_dataset(
    out_dir: &Path,
    config: &SliceConfig,
    recordings: Vec<(String, u16, u16, SlicedRecording)>,
) -> Result<DatasetSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut summary = DatasetSummary {
        delta_us: config.delta_us,
        min_events: config.min_events,
        ..DatasetSummary::default()
    };
    let mut index = String::new();
    let mut next_id = 0u64;
    for (name, width, height, rec) in recordings {
        let stored = write_chunk_files(&name, width, height, &rec.chunks, next_id)?;
        next_id += stored.index.len() as u64;
        write_file(&out_dir.join(format!("{name}.evf")), &stored.evf)?;
        for e in &stored.index {
            index.push_str(&serde_json::to_string(e).expect("index entries serialize"));
            index.push('\n');
        }
        summary.tracks += rec.tracks;
        summary.rejected_tracks += rec.rejected_tracks;
        summary.negatives += rec.negatives;
        summary.chunks += stored.index.len() as u64;
        for (k, v) in rec.dropped {
            *summary.dropped_chunks.entry(k).or_default() += v;
        }
        summary.recordings.push(name);
    }
    write_file(&out_dir.join(INDEX_FILE), index.as_bytes())?;
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_file(&out_dir.join(SUMMARY_FILE), json.as_bytes())?;
    Ok(summary)
}

/// Slices every recording of a synthetic dataset, keeping its splits.
pub fn slice_manifest(dataset_dir: &Path, out_dir: &Path, config: &SliceConfig) -> Result<DatasetSummary> {
    let manifest = Manifest::read(dataset_dir.join(MANIFEST_FILE))?;
    let splits = manifest.split_of();
    let sliced = manifest
        .recordings
        .par_iter()
        .map(|r| {
            let stream = decode_events(&read_file(&dataset_dir.join(&r.evf))?)?;
            let text = String::from_utf8_lossy(&read_file(&dataset_dir.join(&r.annotations))?).into_owned();
            let ann = read_annotations(&text)?;
            let split_of = |id: u64| splits.get(&id).map(|s| s.to_string());
            let rec = slice_recording(&r.name, &stream, &ann, config, &split_of)?;
            Ok((r.name.clone(), stream.width(), stream.height(), rec))
        })
        .collect::<Result<Vec<_>>>()?;
    write_chunk_dataset(out_dir, config, sliced)
}

/// Slices one recording given as files; splits are hashed from track ids.
pub fn slice_files(evf: &Path, annotations: &Path, out_dir: &Path, config: &SliceConfig) -> Result<DatasetSummary> {
    let stream = decode_events(&read_file(evf)?)?;
    let text = String::from_utf8_lossy(&read_file(annotations)?).into_owned();
    let ann = read_annotations(&text)?;
    let name = evf
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recording".into());
    let split_of = |id: u64| Some(config.hashed_split(&name, id).to_string());
    let rec = slice_recording(&name, &stream, &ann, config, &split_of)?;
    write_chunk_dataset(out_dir, config, vec![(name, stream.width(), stream.height(), rec)])
}

/// A chunk with its normalized points.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledChunk {
    pub entry: ChunkIndexEntry,
    pub points: NormalizedPointSet,
}

impl LabeledChunk {
    pub fn label(&self) -> usize {
        self.entry.class.index()
    }

    /// Tracks are keyed by recording and id; negative ids repeat across recordings.
    pub fn track_key(&self) -> (String, u64) {
        (self.entry.recording.clone(), self.entry.track_id)
    }
}

/// A chunk dataset directory loaded into memory.
#[derive(Debug, Clone)]
pub struct ChunkDataset {
    pub dir: PathBuf,
    pub summary: DatasetSummary,
    pub chunks: Vec<LabeledChunk>,
}

impl ChunkDataset {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let summary: DatasetSummary = serde_json::from_slice(&read_file(&dir.join(SUMMARY_FILE))?)
            .map_err(|e| HarnessError::Manifest(format!("{}: {e}", SUMMARY_FILE)))?;
        let index = read_chunk_index(&String::from_utf8_lossy(&read_file(&dir.join(INDEX_FILE))?))?;
        let mut streams: BTreeMap<String, EventStream> = BTreeMap::new();
        for name in &summary.recordings {
            streams.insert(name.clone(), decode_events(&read_file(&dir.join(format!("{name}.evf")))?)?);
        }
        let chunks = index
            .into_par_iter()
            .map(|entry| {
                let stream = streams
                    .get(&entry.recording)
                    .ok_or_else(|| HarnessError::Manifest(format!("chunk {} names unknown recording {}", entry.chunk_id, entry.recording)))?;
                let chunk = entry.load(stream)?;
                let points = normalize_chunk(&chunk)?;
                Ok(LabeledChunk { entry, points })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dir, summary, chunks })
    }

    pub fn split(&self, name: &str) -> Vec<&LabeledChunk> {
        self.chunks
            .iter()
            .filter(|c| c.entry.split.as_deref() == Some(name))
            .collect()
    }

    pub fn dropped_in(&self, split: &str) -> u64 {
        self.summary.dropped_chunks.get(split).copied().unwrap_or(0)
    }
}

/// A sampled, labeled point set ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub chunk_id: u64,
    pub track: (String, u64),
    pub label: usize,
    pub points: NormalizedPointSet,
}

/// Samples every chunk to the `SamplingSpec` point count; chunk ids salt the seeds.
pub fn prepare_examples(chunks: &[&LabeledChunk], sampling: &SamplingSpec) -> Result<Vec<Example>> {
    chunks
        .par_iter()
        .map(|c| {
            Ok(Example {
                chunk_id: c.entry.chunk_id,
                track: c.track_key(),
                label: c.label(),
                points: sampling.apply(&c.points, c.entry.chunk_id)?,
            })
        })
        .collect()
}
