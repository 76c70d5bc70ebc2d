//! Sketches for the heavy distinct hitters problem: given a stream of
//! (label, item) pairs, report the labels paired with the most distinct
//! items using constant memory.
//!
//! The centerpiece is [`SpaceSavingSets`], a bounded map from labels to
//! count-distinct counters with three replacement strategies; the sampling
//! strategy is the one to use in production. Around it sit the counters
//! themselves ([`cardinality`]), exact ground truth and error metrics
//! ([`metrics`]), and reproducible stream generators ([`datagen`]).

pub mod cardinality;
pub mod datagen;
pub mod metrics;
pub mod sketch;

pub use cardinality::{
    hash64, DistinctCounter, ExactCounter, HashValue, HllConfig, HyperLogLog, DEFAULT_SEED,
};
pub use datagen::{gen_overlap, gen_zipf, Entry, OverlapSpec, ZipfSpec};
pub use metrics::{evaluate, ErrorReport, ErrorRow, GroundTruth};
pub use sketch::{
    ExactSpaceSavingSets, HllSpaceSavingSets, Label, SketchStats, SpaceSavingSets, Variant,
};
