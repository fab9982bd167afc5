use super::{Track, TrackError};
use crate::codec::{ClassLabel, Event, PixelBox, FRAME_US};

/// Chunks with fewer events than this carry too little structure to classify.
pub const DEFAULT_MIN_EVENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkSpec {
    /// Window length; must divide the 33 ms annotation frame.
    pub delta_us: i64,
    pub min_events: usize,
}

impl Default for ChunkSpec {
    fn default() -> Self {
        Self {
            delta_us: FRAME_US as i64,
            min_events: DEFAULT_MIN_EVENTS,
        }
    }
}

impl ChunkSpec {
    pub fn validated_delta(&self) -> Result<u64, TrackError> {
        if self.delta_us <= 0 || !FRAME_US.is_multiple_of(self.delta_us as u64) {
            return Err(TrackError::BadDelta {
                delta_us: self.delta_us,
            });
        }
        Ok(self.delta_us as u64)
    }
}

/// The events of one track inside one `[t0, t0 + delta)` window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub track_id: u64,
    pub class_label: ClassLabel,
    pub t0: u64,
    pub delta_us: u64,
    /// The annotation box of the frame this window falls in.
    pub bbox: PixelBox,
    pub events: Vec<Event>,
}

impl Chunk {
    pub fn t1(&self) -> u64 {
        self.t0 + self.delta_us
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chunking {
    pub chunks: Vec<Chunk>,
    /// Windows discarded for holding fewer than `min_events` events.
    pub dropped: usize,
}

/// Splits a track into frame-aligned windows of `spec.delta_us`.
///
/// Each annotation frame yields `33 ms / delta` windows that share the
/// frame's box, so the chunks partition the track's events. Empty windows
/// are always dropped.
pub fn chunk_track(track: &Track, spec: &ChunkSpec) -> Result<Chunking, TrackError> {
    let delta = spec.validated_delta()?;
    let per_frame = FRAME_US / delta;
    let mut out = Chunking::default();
    for b in &track.boxes {
        for k in 0..per_frame {
            let t0 = b.t_start_us + k * delta;
            let t1 = t0 + delta;
            let lo = track.events.partition_point(|e| e.t < t0);
            let hi = track.events.partition_point(|e| e.t < t1);
            if hi == lo || hi - lo < spec.min_events {
                out.dropped += 1;
                continue;
            }
            out.chunks.push(Chunk {
                track_id: track.track_id,
                class_label: track.class_label,
                t0,
                delta_us: delta,
                bbox: b.pixel_box(),
                events: track.events[lo..hi].to_vec(),
            });
        }
    }
    Ok(out)
}
