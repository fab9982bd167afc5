//! From a raw stream plus annotations to normalized per-chunk point sets.

mod assemble;
mod chunk;
mod negatives;
mod normalize;
mod store;

pub use assemble::{assemble_tracks, Assembly, Rejection, Track, MIN_TRACK_FRAMES};
pub use chunk::{chunk_track, Chunk, ChunkSpec, Chunking, DEFAULT_MIN_EVENTS};
pub use negatives::{
    patch_intersects, sample_negatives, NegativeConfig, NegativePatch, NegativeSampler,
    DEFAULT_MAX_ATTEMPTS,
};
pub use normalize::{denormalize_point, normalize_chunk, NormalizedPointSet, Point4};
pub use store::{read_chunk_index, write_chunk_files, ChunkIndexEntry, StoredChunks};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrackError {
    #[error("track {track_id} box at frame {frame_index} exceeds the {width}x{height} sensor")]
    GeometryMismatch {
        track_id: u64,
        frame_index: u64,
        width: u16,
        height: u16,
    },
    #[error("chunk duration {delta_us} us must be positive and divide the annotation frame")]
    BadDelta { delta_us: i64 },
    #[error("chunk has no events")]
    EmptyChunk,
    #[error("stream spans {duration_us} us, shorter than one frame")]
    StreamTooShort { duration_us: u64 },
    #[error("no free patch found after {attempts} attempts")]
    ExhaustedRetries { attempts: usize },
    #[error("chunk index: {0}")]
    Index(String),
}
