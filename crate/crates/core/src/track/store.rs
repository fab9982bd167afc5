//! On-disk chunk datasets: a JSON-lines index plus one EVF1 file of cropped
//! events per recording.
//!
//! Chunks of one recording are laid out back to back in the EVF1 file. To keep
//! the file a valid (time-ordered) EVF1 stream, chunk `k` is rebased so its
//! events occupy `[evf_t0_us, evf_t0_us + delta_us)` with
//! `evf_t0_us = k * delta_us`; the original time is
//! `t0_us + (t_file - evf_t0_us)`. `evf_offset` is the byte offset of the
//! chunk's first record.

use serde::{Deserialize, Serialize};

use super::{Chunk, TrackError};
use crate::codec::{
    encode_events, ClassLabel, Event, EventStream, PixelBox, EVF1_HEADER_LEN, EVF1_RECORD_LEN,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkIndexEntry {
    pub chunk_id: u64,
    pub recording: String,
    pub track_id: u64,
    pub class: ClassLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub t0_us: u64,
    pub delta_us: u64,
    #[serde(rename = "box")]
    pub bbox: PixelBox,
    pub evf_offset: u64,
    pub evf_t0_us: u64,
    pub event_count: u64,
}

impl ChunkIndexEntry {
    /// Rebuilds the chunk from the decoded EVF1 file it points into.
    pub fn load(&self, evf: &EventStream) -> Result<Chunk, TrackError> {
        let bad = |m: &str| TrackError::Index(format!("chunk {}: {m}", self.chunk_id));
        let off = self
            .evf_offset
            .checked_sub(EVF1_HEADER_LEN as u64)
            .ok_or_else(|| bad("offset inside the header"))?;
        if off % EVF1_RECORD_LEN as u64 != 0 {
            return Err(bad("offset not on a record boundary"));
        }
        let lo = (off / EVF1_RECORD_LEN as u64) as usize;
        let hi = lo
            .checked_add(self.event_count as usize)
            .filter(|&hi| hi <= evf.len())
            .ok_or_else(|| bad("range past the end of the file"))?;
        let events = evf.events()[lo..hi]
            .iter()
            .map(|e| {
                let rel = e
                    .t
                    .checked_sub(self.evf_t0_us)
                    .filter(|&r| r < self.delta_us)
                    .ok_or_else(|| bad("event outside its rebased window"))?;
                Ok(Event::new(self.t0_us + rel, e.x, e.y, e.p))
            })
            .collect::<Result<Vec<_>, TrackError>>()?;
        Ok(Chunk {
            track_id: self.track_id,
            class_label: self.class,
            t0: self.t0_us,
            delta_us: self.delta_us,
            bbox: self.bbox,
            events,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredChunks {
    pub evf: Vec<u8>,
    pub index: Vec<ChunkIndexEntry>,
}

/// Serializes one recording's chunks. Ids are assigned consecutively from
/// `first_chunk_id`.
pub fn write_chunk_files(
    recording: &str,
    width: u16,
    height: u16,
    chunks: &[(Chunk, Option<String>)],
    first_chunk_id: u64,
) -> Result<StoredChunks, TrackError> {
    let mut events = Vec::with_capacity(chunks.iter().map(|(c, _)| c.events.len()).sum());
    let mut index = Vec::with_capacity(chunks.len());
    let mut base = 0u64;
    for (k, (chunk, split)) in chunks.iter().enumerate() {
        index.push(ChunkIndexEntry {
            chunk_id: first_chunk_id + k as u64,
            recording: recording.to_string(),
            track_id: chunk.track_id,
            class: chunk.class_label,
            split: split.clone(),
            t0_us: chunk.t0,
            delta_us: chunk.delta_us,
            bbox: chunk.bbox,
            evf_offset: (EVF1_HEADER_LEN + events.len() * EVF1_RECORD_LEN) as u64,
            evf_t0_us: base,
            event_count: chunk.events.len() as u64,
        });
        events.extend(
            chunk
                .events
                .iter()
                .map(|e| Event::new(base + (e.t - chunk.t0), e.x, e.y, e.p)),
        );
        base += chunk.delta_us;
    }
    let stream = EventStream::new(width, height, events).map_err(|e| TrackError::Index(e.to_string()))?;
    Ok(StoredChunks {
        evf: encode_events(&stream),
        index,
    })
}

pub fn read_chunk_index(text: &str) -> Result<Vec<ChunkIndexEntry>, TrackError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TrackError::Index(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
