//! Shared fixtures for the criterion benchmarks.

use heavy_sets::datagen::{gen_zipf, Entry, ZipfSpec};

/// A reproducible zipf workload sized for microbenchmarks.
pub fn zipf_entries(entries: u64, seed: u64) -> Vec<Entry> {
    gen_zipf(&ZipfSpec {
        labels: 20_000,
        exponent: 0.2,
        entries,
        seed,
    })
    .expect("valid spec")
    .collect()
}
