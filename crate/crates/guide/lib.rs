//! The book's chapters as modules, so `cargo test` runs every code block in
//! them as a doc-test. mdbook itself cannot test snippets that depend on
//! workspace crates.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/event-streams.md")]
pub mod event_streams {}
#[doc = include_str!("../../book/src/tracks-and-chunks.md")]
pub mod tracks_and_chunks {}
#[doc = include_str!("../../book/src/sampling.md")]
pub mod sampling {}
#[doc = include_str!("../../book/src/models.md")]
pub mod models {}
#[doc = include_str!("../../book/src/training-and-evaluation.md")]
pub mod training_and_evaluation {}
#[doc = include_str!("../../book/src/synthetic-data.md")]
pub mod synthetic_data {}
#[doc = include_str!("../../book/src/cli.md")]
pub mod cli {}
