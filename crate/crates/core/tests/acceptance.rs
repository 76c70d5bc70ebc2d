//! Acceptance suite: one test per release criterion. Each test prints the
//! measured numbers and a single pass/fail line; thresholds are pinned in
//! the assertions, not tuned at run time.

// threshold checks are written as `!(x <= bound)` so a NaN metric fails
// the criterion instead of slipping past it
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::HashSet;
use std::time::Instant;

use common::*;
use heavy_sets::cardinality::{hash64, DistinctCounter, ExactCounter, HllConfig, HyperLogLog};
use heavy_sets::datagen::{gen_overlap, gen_zipf, Entry, OverlapSpec, ZipfSpec};
use heavy_sets::metrics::{evaluate, nae, qk, GroundTruth};
use heavy_sets::sketch::{Label, SpaceSavingSets, Variant};
use heavy_sets::{ExactSpaceSavingSets, HllSpaceSavingSets};

/// Random-stream battery shared by the two eviction-bound criteria:
/// 204 streams, three capacities, three stream shapes, entry counts up to
/// the 100k cap, always with far more labels than counters.
fn bound_check_streams() -> Vec<(usize, Vec<Entry>)> {
    let mut out = Vec::new();
    for &capacity in &[5usize, 16, 64] {
        for i in 0..66u64 {
            let kind = match i % 3 {
                0 => StreamKind::Uniform,
                1 => StreamKind::Skewed,
                _ => StreamKind::Cycling,
            };
            let m = 1000 + (i as usize % 4) * 1000;
            let labels = (8 + (i as usize % 3) * 4) * capacity;
            let items = (labels as u32) * 4;
            out.push((
                capacity,
                stream(kind, 1000 * capacity as u64 + i, m, labels, items),
            ));
        }
    }
    // two long streams exercise the budget bound at the size cap
    out.push((5, stream(StreamKind::Skewed, 777, 100_000, 400, 2000)));
    out.push((16, stream(StreamKind::Uniform, 778, 100_000, 1280, 4000)));
    out
}

fn offset_sketch(capacity: usize) -> ExactSpaceSavingSets {
    SpaceSavingSets::new(Variant::Offset, capacity, 31, 32, ()).unwrap()
}

#[test]
fn criterion_01_eviction_bounds_hold_after_every_insert() {
    let streams = bound_check_streams();
    assert!(streams.len() >= 200, "need at least 200 streams");
    let mut checked_inserts = 0u64;
    for (capacity, entries) in &streams {
        let mut sk = offset_sketch(*capacity);
        let mut gt = GroundTruth::new();
        let mut last_min = 0.0;
        for (i, e) in entries.iter().enumerate() {
            sk.insert(&e.label, &e.item);
            gt.insert(&e.label, &e.item);
            if sk.len() < sk.capacity() {
                continue;
            }
            checked_inserts += 1;
            let all = sk.top(usize::MAX);
            let alpha = all.last().unwrap().1;
            assert!(
                alpha >= last_min,
                "minimum fell from {last_min} to {alpha} at insert {i}"
            );
            last_min = alpha;
            let budget = (i + 1) as f64 / *capacity as f64;
            assert!(alpha <= budget, "minimum {alpha} above budget {budget}");
            let mut resident = HashSet::with_capacity(all.len());
            for (label, value) in &all {
                let d = gt.distinct(label).unwrap() as f64;
                assert!(
                    *value <= d + alpha,
                    "resident {label}: value {value} > d {d} + alpha {alpha}"
                );
                resident.insert(label);
            }
            for label in gt.labels() {
                if !resident.contains(label) {
                    let d = gt.distinct(label).unwrap() as f64;
                    assert!(
                        d <= alpha,
                        "evicted {label}: true count {d} above minimum {alpha}"
                    );
                }
            }
        }
    }

    // the minimum-monotonicity and budget halves also hold for the other
    // two variants
    for variant in [Variant::Recycle, Variant::Sampling] {
        for (capacity, entries) in streams.iter().take(30) {
            let mut sk: ExactSpaceSavingSets =
                SpaceSavingSets::new(variant, *capacity, 31, 32, ()).unwrap();
            let mut gt = GroundTruth::new();
            let mut last_min = 0.0;
            for (i, e) in entries.iter().enumerate() {
                sk.insert(&e.label, &e.item);
                gt.insert(&e.label, &e.item);
                if sk.len() < sk.capacity() {
                    continue;
                }
                let all = sk.top(usize::MAX);
                let alpha = all.last().unwrap().1;
                assert!(alpha >= last_min, "{variant:?}: minimum decreased");
                last_min = alpha;
                assert!(
                    alpha <= (i + 1) as f64 / *capacity as f64,
                    "{variant:?}: minimum above budget"
                );
                for (label, value) in &all {
                    let d = gt.distinct(label).unwrap() as f64;
                    assert!(*value <= d + alpha, "{variant:?}: overestimate bound");
                }
            }
        }
    }
    println!(
        "criterion 01: eviction bounds held on {} streams ({checked_inserts} checked inserts): PASS",
        streams.len()
    );
}

#[test]
fn criterion_02_worst_case_error_is_within_budget() {
    let streams = bound_check_streams();
    for (capacity, entries) in &streams {
        let mut sk = offset_sketch(*capacity);
        let mut gt = GroundTruth::new();
        for e in entries {
            sk.insert(&e.label, &e.item);
            gt.insert(&e.label, &e.item);
        }
        let budget = entries.len() as f64 / *capacity as f64;
        for label in gt.labels() {
            let d = gt.distinct(label).unwrap() as f64;
            let err = (sk.query(label) - d).abs();
            assert!(
                err <= budget,
                "label {label}: error {err} above m/s = {budget}"
            );
        }
        for i in 0..5 {
            let unseen = label(&format!("unseen-{i}"));
            assert!(gt.distinct(&unseen).is_none());
            assert!(sk.query(&unseen) <= budget);
        }
    }
    println!(
        "criterion 02: worst-case error within m/s on {} streams: PASS",
        streams.len()
    );
}

fn assert_matches_reference<C: DistinctCounter>(config: C::Config, seed: u64, m: usize) {
    let entries = stream(StreamKind::Skewed, seed, m, 300, 2000);
    let sample_seed = seed ^ 0x5111;
    let item_seed = seed ^ 0x1715;
    let mut fast: SpaceSavingSets<C> = SpaceSavingSets::new(
        Variant::Sampling,
        32,
        sample_seed,
        item_seed,
        config.clone(),
    )
    .unwrap();
    let mut reference: SamplingReference<C> =
        SamplingReference::new(32, sample_seed, item_seed, config);
    for e in &entries {
        fast.insert(&e.label, &e.item);
        reference.insert(&e.label, &e.item);
    }
    let mut fast_labels: Vec<Label> = fast.labels().cloned().collect();
    fast_labels.sort();
    assert_eq!(
        fast_labels,
        reference.labels(),
        "seed {seed}: resident sets differ"
    );
    for l in &fast_labels {
        assert_eq!(
            fast.query(l).to_bits(),
            reference.query(l).to_bits(),
            "seed {seed}: query({l}) differs"
        );
    }
    let absent = label("never-in-stream");
    assert_eq!(
        fast.query(&absent).to_bits(),
        reference.query(&absent).to_bits()
    );
}

/// The equivalence is a property of the insert logic, so it is exercised
/// with the exact counter, whose reports are a pure function of its state.
/// The HyperLogLog watermark makes reports depend on when past reports
/// happened, and the reference scans far more often than the cached path,
/// so the two can settle on different victims near the estimator's
/// small-range boundary.
#[test]
fn criterion_03_cached_gate_matches_scan_every_insert_reference() {
    for seed in 0..100 {
        assert_matches_reference::<ExactCounter>((), seed, 4000);
    }
    println!("criterion 03: cached and reference inserts agree bit-exactly on 100 streams: PASS");
}

#[test]
fn criterion_04_hll_accuracy_and_monotonicity() {
    for n in [1_000u64, 10_000, 100_000] {
        let mut fails = 0;
        for seed in 0..100u64 {
            let mut sk = HyperLogLog::new(&HllConfig::new(1024, seed).unwrap());
            let mut last = 0.0;
            let checkpoint = n / 100;
            for i in 0..n {
                sk.insert(hash64(&(seed ^ i.wrapping_mul(0x9E37)).to_le_bytes(), seed));
                if i % checkpoint == 0 {
                    let est = sk.distinct();
                    assert!(est >= last, "estimate decreased at n={n} seed={seed}");
                    last = est;
                }
            }
            let est = sk.distinct();
            assert!(est >= last, "final estimate decreased");
            if (est - n as f64).abs() / n as f64 > 0.10 {
                fails += 1;
            }
        }
        assert!(fails <= 5, "n={n}: {fails}/100 seeds outside 10%");
        println!("criterion 04: n={n}: {fails}/100 seeds outside 10% (allowed 5)");
    }
    println!("criterion 04: counter accuracy and monotonicity: PASS");
}

fn reference_zipf(seed: u64) -> ZipfSpec {
    ZipfSpec {
        labels: 100_000,
        exponent: 0.2,
        entries: 1_000_000,
        seed,
    }
}

fn zipf_ground_truth(spec: &ZipfSpec) -> GroundTruth {
    let mut gt = GroundTruth::new();
    for e in gen_zipf(spec).unwrap() {
        gt.insert(&e.label, &e.item);
    }
    gt
}

#[test]
fn criterion_05_zipf_desk_scale_accuracy() {
    let started = Instant::now();
    let spec = reference_zipf(1);
    let gt = zipf_ground_truth(&spec);
    let mut sk = HllSpaceSavingSets::with_hll(Variant::Sampling, 2000, 1024, 11, 22).unwrap();
    for e in gen_zipf(&spec).unwrap() {
        sk.insert(&e.label, &e.item);
    }
    let report = evaluate(&mut sk, &gt, &[100]).unwrap();
    let row = report.row(100).unwrap();
    let baseline = baseline_nae(&gt, 100);
    let elapsed = started.elapsed();
    println!(
        "criterion 05: NAE(T_100)={:.3} Q_100={:.3} baseline={baseline:.3} elapsed={elapsed:?}",
        row.nae_t, row.q
    );
    let mut failures = Vec::new();
    if !(row.nae_t <= 0.15) {
        failures.push(format!("NAE(T_100)={:.3} above 0.15", row.nae_t));
    }
    if !(row.q <= 0.15) {
        failures.push(format!("Q_100={:.3} above 0.15", row.q));
    }
    if !(row.q < baseline) {
        failures.push(format!(
            "Q_100={:.3} not below baseline {baseline:.3}",
            row.q
        ));
    }
    if !(elapsed.as_secs() <= 60) {
        failures.push(format!("runtime {elapsed:?} above 60s"));
    }
    assert!(failures.is_empty(), "criterion 05: {}", failures.join("; "));
    println!("criterion 05: zipf desk-scale accuracy: PASS");
}

#[test]
fn criterion_06_merging_shards_degrades_gracefully() {
    let spec = reference_zipf(1);
    let gt = zipf_ground_truth(&spec);
    let entries: Vec<Entry> = gen_zipf(&spec).unwrap().collect();
    let shard_len = entries.len() / 10;
    let mut merged: Option<HllSpaceSavingSets> = None;
    for shard in entries.chunks(shard_len) {
        let mut sk = HllSpaceSavingSets::with_hll(Variant::Sampling, 2000, 1024, 11, 22).unwrap();
        for e in shard {
            sk.insert(&e.label, &e.item);
        }
        match merged.as_mut() {
            None => merged = Some(sk),
            Some(dst) => dst.merge(&sk).unwrap(),
        }
    }
    let mut merged = merged.unwrap();
    let report = evaluate(&mut merged, &gt, &[100]).unwrap();
    let row = report.row(100).unwrap();
    let baseline = baseline_nae(&gt, 100);
    println!(
        "criterion 06: merged Q_100={:.3} (single-stream threshold 0.5, baseline {baseline:.3})",
        row.q
    );
    let mut failures = Vec::new();
    if !(row.q <= 0.5) {
        failures.push(format!("merged Q_100={:.3} above 0.5", row.q));
    }
    if !(row.q < baseline) {
        failures.push(format!("merged Q_100={:.3} not below baseline", row.q));
    }
    assert!(failures.is_empty(), "criterion 06: {}", failures.join("; "));
    println!("criterion 06: merge degradation: PASS");
}

/// Heavy labels with stable sets plus a cycling tail in which every label is
/// forever re-paired with its own single item. Offsetting and recycling both
/// inflate the cycled labels toward the stream budget; sampling ignores them.
fn cycling_adversarial_stream() -> Vec<Entry> {
    let mut entries = Vec::new();
    for h in 0..1100u32 {
        for i in 0..100u32 {
            entries.push(Entry {
                label: label(&format!("h{h:04}")),
                item: format!("h{h}x{i}").into_bytes(),
            });
        }
    }
    for _cycle in 0..40u32 {
        for t in 0..11_000u32 {
            entries.push(Entry {
                label: label(&format!("t{t:05}")),
                item: format!("ti{t}").into_bytes(),
            });
        }
    }
    entries
}

#[test]
fn criterion_07_sampling_beats_the_other_variants() {
    let spec = reference_zipf(1);
    let gt = zipf_ground_truth(&spec);
    let mut q1000 = Vec::new();
    for variant in [Variant::Sampling, Variant::Recycle, Variant::Offset] {
        let mut sk: ExactSpaceSavingSets = SpaceSavingSets::new(variant, 2000, 11, 22, ()).unwrap();
        for e in gen_zipf(&spec).unwrap() {
            sk.insert(&e.label, &e.item);
        }
        let report = evaluate(&mut sk, &gt, &[1000]).unwrap();
        q1000.push(report.row(1000).unwrap().q);
    }
    let (q_sampling, q_recycle, q_offset) = (q1000[0], q1000[1], q1000[2]);
    println!(
        "criterion 07: zipf Q_1000 sampling={q_sampling:.3} recycle={q_recycle:.3} offset={q_offset:.3}"
    );

    let adversarial = cycling_adversarial_stream();
    let adv_gt = ground_truth(&adversarial);
    let mut adv = Vec::new();
    for variant in [Variant::Sampling, Variant::Recycle, Variant::Offset] {
        let mut sk: ExactSpaceSavingSets = SpaceSavingSets::new(variant, 2000, 11, 22, ()).unwrap();
        feed(&mut sk, &adversarial);
        let report = evaluate(&mut sk, &adv_gt, &[1000]).unwrap();
        adv.push(report.row(1000).unwrap().q);
    }
    let (a_sampling, a_recycle, a_offset) = (adv[0], adv[1], adv[2]);
    println!(
        "criterion 07: cycling Q_1000 sampling={a_sampling:.3} recycle={a_recycle:.3} offset={a_offset:.3}"
    );

    let mut failures = Vec::new();
    if !(q_sampling < q_recycle) {
        failures.push("sampling not better than recycling on zipf".to_string());
    }
    if !(q_sampling < q_offset) {
        failures.push("sampling not better than offsetting on zipf".to_string());
    }
    if !(a_sampling <= 0.2) {
        failures.push(format!(
            "sampling Q_1000={a_sampling:.3} above 0.2 on cycling stream"
        ));
    }
    if !(a_recycle > 1.0) {
        failures.push(format!(
            "recycling Q_1000={a_recycle:.3} not above 1.0 on cycling stream"
        ));
    }
    if !(a_offset > 1.0) {
        failures.push(format!(
            "offsetting Q_1000={a_offset:.3} not above 1.0 on cycling stream"
        ));
    }
    assert!(failures.is_empty(), "criterion 07: {}", failures.join("; "));
    println!("criterion 07: sampling necessity: PASS");
}

#[test]
fn criterion_08_metric_worked_examples() {
    // ten sets of 100, ten of 10, two hundred singletons; tail labels sort
    // first so estimate ties resolve toward them
    let mut gt = GroundTruth::new();
    for i in 0..10 {
        let l = label(&format!("m{i:02}"));
        for item in 0..100 {
            gt.insert(&l, format!("m{i}x{item}").as_bytes());
        }
    }
    for i in 10..20 {
        let l = label(&format!("n{i:02}"));
        for item in 0..10 {
            gt.insert(&l, format!("n{i}x{item}").as_bytes());
        }
    }
    for i in 0..200 {
        gt.insert(&label(&format!("a{i:03}")), format!("a{i}x").as_bytes());
    }

    // a sketch that is exact on the top ten but answers 1000 for everything
    // else self-reports ten singletons; its self-top-10 error is 999
    let reported: Vec<(Label, f64)> = (0..10)
        .map(|i| (label(&format!("a{i:03}")), 1000.0))
        .collect();
    let nae_s = nae(&reported, &gt).unwrap();
    let truth: Vec<(Label, f64)> = (0..10)
        .map(|i| (label(&format!("m{i:02}")), 100.0))
        .collect();
    let nae_t = nae(&truth, &gt).unwrap();
    let q10 = qk(nae_s, nae_t);
    let golden_q10 = 999.0 / 2.0f64.sqrt();

    // two sketches exact on twenty labels each, zero elsewhere: one keeps
    // the top ten, the other misses it entirely
    let t20 = gt.topk(20);
    let keep_top: Vec<(Label, f64)> = t20
        .iter()
        .map(|l| {
            let keep = l.bytes().starts_with(b"m") || l.bytes() < b"a010".as_slice();
            (
                l.clone(),
                if keep {
                    gt.distinct(l).unwrap() as f64
                } else {
                    0.0
                },
            )
        })
        .collect();
    let miss_top: Vec<(Label, f64)> = t20
        .iter()
        .map(|l| {
            let keep = l.bytes().starts_with(b"n") || l.bytes() < b"a010".as_slice();
            (
                l.clone(),
                if keep {
                    gt.distinct(l).unwrap() as f64
                } else {
                    0.0
                },
            )
        })
        .collect();
    let q20_keep = qk(0.0, nae(&keep_top, &gt).unwrap());
    let q20_miss = qk(0.0, nae(&miss_top, &gt).unwrap());

    println!(
        "criterion 08: NAE(S_10)={nae_s} Q_10={q10:.4} Q_20 keep={q20_keep:.4} miss={q20_miss:.4}"
    );
    assert_eq!(nae_s, 999.0);
    assert_eq!(nae_t, 0.0);
    assert!((q10 - golden_q10).abs() < 1e-9);
    assert!((q20_keep - 1.0 / (11.0 * 2.0f64.sqrt())).abs() < 0.005);
    assert!((q20_miss - 10.0 / (11.0 * 2.0f64.sqrt())).abs() < 0.005);
    assert!((q20_keep - 0.064).abs() < 0.005);
    assert!((q20_miss - 0.64).abs() < 0.005);
    println!("criterion 08: metric worked examples: PASS");
}

#[test]
fn criterion_09_gate_fast_path_and_bit_exact_snapshots() {
    let spec = reference_zipf(1);
    let mut sk = HllSpaceSavingSets::with_hll(Variant::Sampling, 2000, 1024, 11, 22).unwrap();
    for e in gen_zipf(&spec).unwrap() {
        sk.insert(&e.label, &e.item);
    }
    let stats = sk.stats();
    let non_resident_full = stats.gate_rejections + stats.min_scans;
    let ratio = stats.min_scans as f64 / non_resident_full as f64;
    println!(
        "criterion 09: {} scans / {} full-sketch non-resident inserts = {ratio:.4}",
        stats.min_scans, non_resident_full
    );
    assert!(ratio <= 0.10, "scan ratio {ratio:.4} above 10%");

    for seed in 0..100u64 {
        let entries = stream(StreamKind::Skewed, seed, 2000, 200, 500);
        let mut sk =
            HllSpaceSavingSets::with_hll(Variant::Sampling, 24, 64, seed, seed ^ 9).unwrap();
        for e in &entries {
            sk.insert(&e.label, &e.item);
        }
        let bytes = sk.to_bytes();
        let back = HllSpaceSavingSets::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes, "round trip differs at seed {seed}");
    }
    println!("criterion 09: gate fast path and snapshot round-trips: PASS");
}

#[test]
fn criterion_10_overlapping_sets_recover_the_heavy_labels() {
    let spec = OverlapSpec {
        universe_size: 100_000,
        common_size: 10_000,
        small_sets: 10_000,
        small_set_size: 100,
        heavy_sets: 100,
        heavy_set_size: 5000,
        seed: 1,
    };
    let mut gt = GroundTruth::new();
    for e in gen_overlap(&spec).unwrap() {
        gt.insert(&e.label, &e.item);
    }
    // the generator invariant the stream depends on: exactly 100 labels
    // with 5000 distinct items
    let heavy_count = gt.labels().filter(|l| gt.distinct(l) == Some(5000)).count();
    assert_eq!(heavy_count, 100);

    let mut sk = HllSpaceSavingSets::with_hll(Variant::Sampling, 100, 1024, 11, 22).unwrap();
    for e in gen_overlap(&spec).unwrap() {
        sk.insert(&e.label, &e.item);
    }
    let top = sk.top(100);
    let heavy_in_top = top
        .iter()
        .filter(|(l, _)| l.bytes().starts_with(b"h"))
        .count();
    let report = evaluate(&mut sk, &gt, &[100]).unwrap();
    let row = report.row(100).unwrap();
    println!(
        "criterion 10: heavy labels in top(100)={heavy_in_top}/100, NAE(T_100)={:.3}",
        row.nae_t
    );
    let mut failures = Vec::new();
    if heavy_in_top != 100 {
        failures.push(format!("only {heavy_in_top}/100 heavy labels in top(100)"));
    }
    if !(row.nae_t <= 0.15) {
        failures.push(format!("NAE(T_100)={:.3} above 0.15", row.nae_t));
    }
    assert!(failures.is_empty(), "criterion 10: {}", failures.join("; "));
    println!("criterion 10: overlapping heavy sets: PASS");
}
