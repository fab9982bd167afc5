//! Event streams, box annotations and their on-disk formats.
//!
//! * EVF1 binary event files: a 16-byte header followed by fixed 13-byte
//!   little-endian records (see [`encode_events`]).
//! * JSON-lines box annotations, one [`BoxRecord`] per line.
//! * PGM accumulation frames for eyeballing a time window.

mod annotations;
mod events;
mod render;

pub use annotations::{
    read_annotations, write_annotations, AnnotatedTrack, AnnotationError, AnnotationSet,
    BoxRecord, ClassLabel, PixelBox, FRAME_US,
};
pub use events::{
    decode_events, encode_events, CodecError, Event, EventStream, Polarity, DEFAULT_HEIGHT,
    DEFAULT_WIDTH, EVF1_HEADER_LEN, EVF1_MAGIC, EVF1_RECORD_LEN,
};
pub use render::{render_frame, AccumulationFrame};
