//! Shared helpers for the integration and acceptance suites: stream
//! builders, exact ground truth, and an independent reference
//! implementation of the sampling sketch that scans on every insert.

// each test target compiles this module separately and uses a subset of it
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heavy_sets::cardinality::{hash64, DistinctCounter};
use heavy_sets::datagen::Entry;
use heavy_sets::metrics::GroundTruth;
use heavy_sets::sketch::{Label, SpaceSavingSets};

pub fn label(s: &str) -> Label {
    Label::try_from(s).unwrap()
}

#[derive(Clone, Copy, Debug)]
pub enum StreamKind {
    /// Labels drawn uniformly.
    Uniform,
    /// Labels drawn with a quadratic skew toward low ranks.
    Skewed,
    /// Labels cycled round-robin, the churn-heavy adversarial shape.
    Cycling,
}

/// A reproducible in-memory stream with duplicate items (bounded item
/// universe per run) so idempotence paths get exercised.
pub fn stream(
    kind: StreamKind,
    seed: u64,
    entries: usize,
    n_labels: usize,
    item_universe: u32,
) -> Vec<Entry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..entries)
        .map(|i| {
            let rank = match kind {
                StreamKind::Uniform => rng.gen_range(0..n_labels),
                StreamKind::Skewed => {
                    let u: f64 = rng.gen();
                    ((u * u * n_labels as f64) as usize).min(n_labels - 1)
                }
                StreamKind::Cycling => i % n_labels,
            };
            Entry {
                label: label(&format!("l{rank}")),
                item: rng.gen_range(0..item_universe).to_string().into_bytes(),
            }
        })
        .collect()
}

pub fn ground_truth(entries: &[Entry]) -> GroundTruth {
    let mut gt = GroundTruth::new();
    for e in entries {
        gt.insert(&e.label, &e.item);
    }
    gt
}

pub fn feed<C: DistinctCounter>(sketch: &mut SpaceSavingSets<C>, entries: &[Entry]) {
    for e in entries {
        sketch.insert(&e.label, &e.item);
    }
}

/// All-zero-estimator baseline over the true top k, computed honestly from
/// the metric definition (it always comes out 1.0).
pub fn baseline_nae(gt: &GroundTruth, k: usize) -> f64 {
    let zeros: Vec<(Label, f64)> = gt.topk(k).into_iter().map(|l| (l, 0.0)).collect();
    heavy_sets::metrics::nae(&zeros, gt).unwrap()
}

/// Reference sampling sketch that recomputes the minimum counter on every
/// non-resident insert instead of caching it. Deliberately written apart
/// from the production insert path; the two must construct identical
/// sketches.
pub struct SamplingReference<C: DistinctCounter> {
    capacity: usize,
    sample_seed: u64,
    item_seed: u64,
    counter_config: C::Config,
    entries: HashMap<Label, C>,
}

impl<C: DistinctCounter> SamplingReference<C> {
    pub fn new(
        capacity: usize,
        sample_seed: u64,
        item_seed: u64,
        counter_config: C::Config,
    ) -> Self {
        Self {
            capacity,
            sample_seed,
            item_seed,
            counter_config,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, label: &Label, item: &[u8]) {
        let item_hash = hash64(item, self.item_seed);
        if let Some(counter) = self.entries.get_mut(label) {
            counter.insert(item_hash);
            return;
        }
        if self.entries.len() < self.capacity {
            let mut counter = C::new(&self.counter_config);
            counter.insert(item_hash);
            self.entries.insert(label.clone(), counter);
            return;
        }
        let (victim, min_distinct) = self.argmin();
        let sample = 1.0 / hash64(item, self.sample_seed).unit_interval();
        if sample > min_distinct {
            let mut counter = self.entries.remove(&victim).unwrap();
            counter.insert(item_hash);
            self.entries.insert(label.clone(), counter);
        }
    }

    fn argmin(&mut self) -> (Label, f64) {
        let mut best: Option<(&Label, f64)> = None;
        for (label, counter) in self.entries.iter_mut() {
            let d = counter.distinct();
            let better = match best {
                None => true,
                Some((best_label, best_d)) => d < best_d || (d == best_d && label < best_label),
            };
            if better {
                best = Some((label, d));
            }
        }
        let (label, d) = best.expect("argmin on non-empty reference");
        (label.clone(), d)
    }

    pub fn query(&mut self, label: &Label) -> f64 {
        if let Some(counter) = self.entries.get_mut(label) {
            return counter.distinct();
        }
        self.entries
            .values_mut()
            .map(|c| c.distinct())
            .min_by(f64::total_cmp)
            .unwrap_or(0.0)
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut labels: Vec<Label> = self.entries.keys().cloned().collect();
        labels.sort();
        labels
    }
}
