//! Performance-understanding toolkit for solo piano recordings.
//!
//! The crate covers three tasks over segment-level audio embeddings:
//! pairwise expertise ranking, difficulty estimation and technique
//! detection, plus tournament ranking of competition candidates from
//! pairwise decisions.
//!
//! ```text
//! manifest -> audio (segment, mel) -> embeddings -> pairing -> model -> metrics
//!                                                                \-> aggregation
//! ```

pub mod aggregation;
pub mod audio;
pub mod embeddings;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod pairing;
pub mod plot;
pub mod report;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};

/// Length of one analysis segment in seconds.
pub const SEGMENT_SECONDS: f64 = 10.0;
/// Segments kept per recording (5 minutes of audio).
pub const MAX_SEGMENTS: usize = 30;
