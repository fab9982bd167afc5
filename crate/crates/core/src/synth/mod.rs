//! Labeled synthetic recordings.
//!
//! Each class has its own emission signature: insects beat their wings at
//! 100 to 400 Hz, birds flap slowly while gliding, drones hover with four
//! fast propellers, and background patches flicker without structure.
//! Ambient sensor noise covers the whole frame, object boxes included.

mod config;
mod dataset;
mod motion;

pub use config::{BackgroundParams, BirdParams, DroneParams, InsectParams, SynthConfig};
pub use dataset::{
    gen_dataset, plan_dataset, regenerate, render_recording, write_dataset, Manifest, Recording, RecordingEntry,
    TrackEntry, MANIFEST_FILE, SPLITS,
};
pub use motion::{ambient_noise, background_events, gen_track, GeneratedTrack};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("scene layout: {0}")]
    Layout(String),
}
