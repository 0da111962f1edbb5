//! Data ingestion and synthetic stream generation: schema-driven CSV
//! loading with causal standardization, the two-segment toy stream, the
//! protected-attribute-flip drift stream, and segment replay.

mod flip;
mod ingest;
mod kmeans;
mod schema;
mod standardize;
mod synth;

pub use flip::attribute_flip_stream;
pub use ingest::{ingest_csv, read_all, segment_replay, CsvStream, SegmentReplay};
pub use kmeans::k_means;
pub use schema::{EncodedSchema, Schema, SlotKind};
pub use standardize::Standardizer;
pub use synth::{
    biased_stream, toy_segment1_separator, toy_self_test, toy_two_segment_stream, ToySelfTest,
    BIASED_PROTECTED_FEATURE_INDEX,
};

use crate::loss::StreamInstance;

/// One item of a training stream: an instance or a segment boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    Instance(StreamInstance),
    /// End of segment `index` (0-based); emitted after its last instance.
    SegmentBoundary { index: usize },
}

impl StreamEvent {
    pub fn instance(&self) -> Option<&StreamInstance> {
        match self {
            StreamEvent::Instance(inst) => Some(inst),
            StreamEvent::SegmentBoundary { .. } => None,
        }
    }
}

/// Configuration of a synthetic drift stream.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftSpec {
    /// Two Gaussian-blob segments; the second breaks the first segment's
    /// separator and its fairness.
    ToyTwoSegment { segment_sizes: [usize; 2], seed: u64 },
    /// A base stream followed by a group-flipped copy, truncated to the
    /// most realistic fraction after k-means sorting.
    AttributeFlip { realism_sort_fraction: f64, seed: u64 },
    /// Replay of schema-compatible files in order with boundary markers.
    SegmentReplay { paths: Vec<std::path::PathBuf> },
}
