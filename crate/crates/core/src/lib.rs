//! Classification of flying objects (insects, birds, drones) in asynchronous
//! event-camera streams.
//!
//! The pipeline runs in stages:
//!
//! 1. [`codec`] decodes event streams and per-frame box annotations.
//! 2. [`track`] assembles annotated tracks, slices them into fixed-duration
//!    chunks and normalizes each chunk into a 4-D point set `(x, y, t, p)`.
//! 3. [`sampling`] reduces a point set to exactly `N` points (random,
//!    most-recent or farthest-point sampling).
//! 4. [`model`] encodes the point set with a flat or hierarchical point
//!    encoder and classifies it, built on the small autodiff engine in [`nn`].
//! 5. [`harness`] trains, evaluates per chunk and per track (majority vote),
//!    and renders reports.
//!
//! [`synth`] generates labeled synthetic recordings so every stage can run
//! without a recorded dataset.

pub mod codec;
pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod track;

pub use codec::{BoxRecord, ClassLabel, Event, EventStream, Polarity};
pub use error::{Error, Result};
pub use sampling::{SamplingSpec, Strategy};
pub use track::{Chunk, NormalizedPointSet, Track};
