//! Space-Saving Set sketches: fixed-size summaries of (label, item) streams
//! that answer "which labels have the most distinct items?".
//!
//! The sketch keeps up to `s` labels, each with a count-distinct counter.
//! Labels already in the sketch insert straight into their counter. A new
//! label arriving at a full sketch is handled per [`Variant`]:
//!
//! - [`Variant::Offset`]: the minimum-value entry is dropped and its value is
//!   recorded as the new entry's offset, so reported values never decrease.
//! - [`Variant::Recycle`]: the minimum entry's counter is re-keyed to the new
//!   label with its state intact.
//! - [`Variant::Sampling`]: the item must first pass an admission gate. The
//!   item's hash is mapped to 1/u as a crude one-item cardinality estimate,
//!   and only estimates exceeding the smallest resident counter displace it.
//!   The smallest counter value is cached in `theta`, a stale lower bound
//!   that lets most rejected items skip the minimum scan entirely.
//!
//! Sampling keeps small sets from constantly churning the bottom of the
//! sketch, which is what ruins the accuracy of the first two variants on
//! streams with many more labels than counters.

use std::collections::HashMap;
use std::error;
use std::fmt;

use crate::cardinality::{hash64, DistinctCounter, HashValue, HllConfig, HyperLogLog};

/// Labels are arbitrary byte strings totally ordered by their bytes; the
/// order breaks every tie in the sketch (eviction, top-k, merges).
pub const MAX_LABEL_LEN: usize = u16::MAX as usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Vec<u8>);

impl Label {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, LabelError> {
        let bytes = bytes.into();
        if bytes.len() > MAX_LABEL_LEN {
            return Err(LabelError::TooLong(bytes.len()));
        }
        Ok(Self(bytes))
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }
}

impl TryFrom<&str> for Label {
    type Error = LabelError;

    fn try_from(s: &str) -> Result<Self, LabelError> {
        Label::new(s.as_bytes().to_vec())
    }
}

impl TryFrom<&[u8]> for Label {
    type Error = LabelError;

    fn try_from(bytes: &[u8]) -> Result<Self, LabelError> {
        Label::new(bytes.to_vec())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", String::from_utf8_lossy(&self.0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelError {
    TooLong(usize),
}

impl fmt::Display for LabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelError::TooLong(len) => {
                write!(
                    f,
                    "label of {len} bytes exceeds the {MAX_LABEL_LEN}-byte limit"
                )
            }
        }
    }
}

impl error::Error for LabelError {}

/// How a full sketch makes room for a label it has never seen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Evict the minimum counter, folding its value into the newcomer's
    /// offset (the plain Space-Saving rule).
    Offset,
    /// Re-key the minimum counter to the newcomer, keeping its state.
    Recycle,
    /// Recycle, but only for items that pass the sampling gate.
    Sampling,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Offset => 0,
            Variant::Recycle => 1,
            Variant::Sampling => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::Offset),
            1 => Some(Variant::Recycle),
            2 => Some(Variant::Sampling),
            _ => None,
        }
    }

    /// Short names used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            Variant::Offset => "sss",
            Variant::Recycle => "rsss",
            Variant::Sampling => "ssss",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sss" => Some(Variant::Offset),
            "rsss" => Some(Variant::Recycle),
            "ssss" => Some(Variant::Sampling),
            _ => None,
        }
    }
}

/// Operation counters, exposed for property tests and benchmarks.
///
/// `gate_rejections` counts inserts rejected by the cached gate without a
/// scan; rejections decided after a fresh minimum scan show up as
/// `min_scans - evictions` instead.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SketchStats {
    pub inserts: u64,
    pub gate_rejections: u64,
    pub min_scans: u64,
    pub evictions: u64,
}

#[derive(Clone, Debug)]
struct CounterEntry<C> {
    counter: C,
    offset: f64,
    // estimate memoized between counter mutations so minimum scans do not
    // recompute untouched counters
    cached: f64,
    dirty: bool,
}

impl<C: DistinctCounter> CounterEntry<C> {
    fn fresh(counter: C, offset: f64) -> Self {
        Self {
            counter,
            offset,
            cached: 0.0,
            dirty: true,
        }
    }

    fn insert(&mut self, item: HashValue) {
        self.counter.insert(item);
        self.dirty = true;
    }

    /// Counter estimate without the offset.
    fn estimate(&mut self) -> f64 {
        if self.dirty {
            self.cached = self.counter.distinct();
            self.dirty = false;
        }
        self.cached
    }

    /// What a query reports for this entry.
    fn value(&mut self) -> f64 {
        self.estimate() + self.offset
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SketchError {
    ZeroCapacity,
    BadCounterConfig(crate::cardinality::ConfigError),
    /// Merge inputs differ in variant, capacity, seeds, or counter config.
    Incompatible,
}

impl fmt::Display for SketchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SketchError::ZeroCapacity => write!(f, "sketch capacity must be at least 1"),
            SketchError::BadCounterConfig(e) => write!(f, "bad counter config: {e}"),
            SketchError::Incompatible => {
                write!(
                    f,
                    "sketches differ in variant, capacity, seeds, or counter config"
                )
            }
        }
    }
}

impl error::Error for SketchError {}

/// A Space-Saving Set sketch over any [`DistinctCounter`].
///
/// Single-writer: callers serialize mutation. `query` and `top` take
/// `&mut self` because reporting an estimate advances the counter's
/// monotonicity watermark.
#[derive(Clone, Debug)]
pub struct SpaceSavingSets<C: DistinctCounter> {
    variant: Variant,
    capacity: usize,
    sample_seed: u64,
    item_seed: u64,
    counter_config: C::Config,
    entries: HashMap<Label, CounterEntry<C>>,
    theta: f64,
    stats: SketchStats,
}

pub type HllSpaceSavingSets = SpaceSavingSets<HyperLogLog>;
pub type ExactSpaceSavingSets = SpaceSavingSets<crate::cardinality::ExactCounter>;

impl<C: DistinctCounter> SpaceSavingSets<C> {
    pub fn new(
        variant: Variant,
        capacity: usize,
        sample_seed: u64,
        item_seed: u64,
        counter_config: C::Config,
    ) -> Result<Self, SketchError> {
        if capacity == 0 {
            return Err(SketchError::ZeroCapacity);
        }
        Ok(Self {
            variant,
            capacity,
            sample_seed,
            item_seed,
            counter_config,
            entries: HashMap::with_capacity(capacity),
            theta: 0.0,
            stats: SketchStats::default(),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.entries.contains_key(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.entries.keys()
    }

    /// Cached lower bound of the minimum counter (sampling variant only).
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn stats(&self) -> SketchStats {
        self.stats
    }

    pub fn sample_seed(&self) -> u64 {
        self.sample_seed
    }

    pub fn item_seed(&self) -> u64 {
        self.item_seed
    }

    pub fn counter_config(&self) -> &C::Config {
        &self.counter_config
    }

    pub fn insert(&mut self, label: &Label, item: &[u8]) {
        self.stats.inserts += 1;
        let item_hash = hash64(item, self.item_seed);
        if let Some(entry) = self.entries.get_mut(label) {
            entry.insert(item_hash);
            return;
        }
        if self.entries.len() < self.capacity {
            let mut entry = CounterEntry::fresh(C::new(&self.counter_config), 0.0);
            entry.insert(item_hash);
            self.entries.insert(label.clone(), entry);
            return;
        }
        match self.variant {
            Variant::Offset => {
                self.stats.min_scans += 1;
                let (victim, min_value) = self.argmin();
                self.entries.remove(&victim);
                self.stats.evictions += 1;
                let mut entry = CounterEntry::fresh(C::new(&self.counter_config), min_value);
                entry.insert(item_hash);
                self.entries.insert(label.clone(), entry);
            }
            Variant::Recycle => {
                self.stats.min_scans += 1;
                let (victim, _) = self.argmin();
                self.recycle(victim, label, item_hash);
            }
            Variant::Sampling => {
                let sample = 1.0 / hash64(item, self.sample_seed).unit_interval();
                if sample <= self.theta {
                    self.stats.gate_rejections += 1;
                    return;
                }
                self.stats.min_scans += 1;
                let (victim, min_estimate) = self.argmin();
                self.theta = min_estimate;
                if sample > min_estimate {
                    self.recycle(victim, label, item_hash);
                }
            }
        }
    }

    fn recycle(&mut self, victim: Label, label: &Label, item_hash: HashValue) {
        self.stats.evictions += 1;
        let mut entry = self.entries.remove(&victim).expect("victim is resident");
        entry.insert(item_hash);
        self.entries.insert(label.clone(), entry);
    }

    /// Minimum entry and its key, ties broken by smallest label. The offset
    /// variant ranks entries by reported value; the others have no offsets
    /// and rank by the counter estimate alone.
    fn argmin(&mut self) -> (Label, f64) {
        let with_offset = self.variant == Variant::Offset;
        let mut best: Option<(&Label, f64)> = None;
        for (label, entry) in self.entries.iter_mut() {
            let key = if with_offset {
                entry.value()
            } else {
                entry.estimate()
            };
            let better = match best {
                None => true,
                Some((best_label, best_key)) => {
                    key < best_key || (key == best_key && label < best_label)
                }
            };
            if better {
                best = Some((label, key));
            }
        }
        let (label, key) = best.expect("argmin on a non-empty sketch");
        (label.clone(), key)
    }

    /// Estimated distinct count for a label. Absent labels get the smallest
    /// resident value (they cannot have more without being resident), or 0
    /// from an empty sketch.
    pub fn query(&mut self, label: &Label) -> f64 {
        if let Some(entry) = self.entries.get_mut(label) {
            return entry.value();
        }
        self.min_value().unwrap_or(0.0)
    }

    /// Smallest reported value over all entries; `None` when empty.
    pub fn min_value(&mut self) -> Option<f64> {
        self.entries
            .values_mut()
            .map(|e| e.value())
            .min_by(f64::total_cmp)
    }

    /// The `k` largest entries, sorted by descending estimate with ties in
    /// ascending label order. Values match what `query` returns.
    pub fn top(&mut self, k: usize) -> Vec<(Label, f64)> {
        let mut items: Vec<(Label, f64)> = self
            .entries
            .iter_mut()
            .map(|(label, entry)| (label.clone(), entry.value()))
            .collect();
        items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        items.truncate(k);
        items
    }

    /// Folds `other` in: shared labels merge their counters (offsets keep the
    /// max), labels only in `other` are adopted, and the result is cut back
    /// to the `capacity` largest counters.
    pub fn merge(&mut self, other: &Self) -> Result<(), SketchError> {
        if self.variant != other.variant
            || self.capacity != other.capacity
            || self.sample_seed != other.sample_seed
            || self.item_seed != other.item_seed
            || self.counter_config != other.counter_config
        {
            return Err(SketchError::Incompatible);
        }
        for (label, src) in &other.entries {
            match self.entries.get_mut(label) {
                Some(dst) => {
                    dst.counter
                        .merge(&src.counter)
                        .expect("counter configs match by construction");
                    dst.offset = dst.offset.max(src.offset);
                    dst.dirty = true;
                }
                None => {
                    let mut adopted = src.clone();
                    adopted.dirty = true;
                    self.entries.insert(label.clone(), adopted);
                }
            }
        }
        if self.entries.len() > self.capacity {
            let mut ranked: Vec<(Label, f64)> = self
                .entries
                .iter_mut()
                .map(|(label, entry)| (label.clone(), entry.estimate()))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            for (label, _) in &ranked[self.capacity..] {
                self.entries.remove(label);
            }
        }
        // A theta above the smallest counter would make the gate reject items
        // a scan would have admitted, so it is only seeded when the merged
        // sketch is full and otherwise drops back to zero.
        self.theta = if self.variant == Variant::Sampling && self.entries.len() == self.capacity {
            self.entries
                .values_mut()
                .map(|e| e.estimate())
                .min_by(f64::total_cmp)
                .unwrap_or(0.0)
        } else {
            0.0
        };
        Ok(())
    }
}

pub const MAGIC: [u8; 4] = *b"SSSS";
pub const FORMAT_VERSION: u8 = 1;

/// Errors from [`SpaceSavingSets::from_bytes`], each naming the byte offset
/// where parsing failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseError {
    BadMagic {
        offset: usize,
    },
    UnsupportedVersion {
        offset: usize,
        version: u8,
    },
    BadVariant {
        offset: usize,
        code: u8,
    },
    BadCapacity {
        offset: usize,
    },
    BadRegisterCount {
        offset: usize,
        log2: u16,
    },
    BadEntryCount {
        offset: usize,
        count: u32,
        capacity: u32,
    },
    DuplicateLabel {
        offset: usize,
    },
    CounterMismatch {
        offset: usize,
    },
    Truncated {
        offset: usize,
    },
    TrailingBytes {
        offset: usize,
    },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::BadMagic { offset } => write!(f, "bad magic at offset {offset}"),
            ParseError::UnsupportedVersion { offset, version } => {
                write!(f, "unsupported format version {version} at offset {offset}")
            }
            ParseError::BadVariant { offset, code } => {
                write!(f, "unknown variant code {code} at offset {offset}")
            }
            ParseError::BadCapacity { offset } => {
                write!(f, "capacity must be at least 1 (offset {offset})")
            }
            ParseError::BadRegisterCount { offset, log2 } => {
                write!(f, "bad log2 register count {log2} at offset {offset}")
            }
            ParseError::BadEntryCount {
                offset,
                count,
                capacity,
            } => write!(
                f,
                "entry count {count} exceeds capacity {capacity} (offset {offset})"
            ),
            ParseError::DuplicateLabel { offset } => {
                write!(f, "duplicate label at offset {offset}")
            }
            ParseError::CounterMismatch { offset } => write!(
                f,
                "embedded counter config disagrees with header (offset {offset})"
            ),
            ParseError::Truncated { offset } => write!(f, "input truncated at offset {offset}"),
            ParseError::TrailingBytes { offset } => {
                write!(f, "trailing bytes after the last entry (offset {offset})")
            }
        }
    }
}

impl error::Error for ParseError {}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        if self.bytes.len() - self.pos < n {
            return Err(ParseError::Truncated { offset: self.pos });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ParseError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ParseError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ParseError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ParseError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ParseError> {
        Ok(f64::from_bits(self.u64()?))
    }
}

impl SpaceSavingSets<HyperLogLog> {
    /// Builds an empty HLL-backed sketch. The register seed doubles as the
    /// item-hash seed; the sample seed should be independent of it.
    pub fn with_hll(
        variant: Variant,
        capacity: usize,
        register_count: usize,
        sample_seed: u64,
        register_seed: u64,
    ) -> Result<Self, SketchError> {
        let config =
            HllConfig::new(register_count, register_seed).map_err(SketchError::BadCounterConfig)?;
        SpaceSavingSets::new(variant, capacity, sample_seed, register_seed, config)
    }

    /// Serializes the sketch. Layout (little-endian throughout): magic
    /// "SSSS", u8 version, u8 variant, u32 capacity, u16 log2(registers),
    /// u64 sample seed, u64 register seed, f64 theta, u32 entry count, then
    /// per entry: u16 label length, label bytes, f64 offset, counter payload.
    /// Entries are written in ascending label order so equal sketches
    /// serialize to identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.push(FORMAT_VERSION);
        out.push(self.variant.code());
        out.extend_from_slice(&(self.capacity as u32).to_le_bytes());
        let log2r = self.counter_config.register_count().trailing_zeros() as u16;
        out.extend_from_slice(&log2r.to_le_bytes());
        out.extend_from_slice(&self.sample_seed.to_le_bytes());
        out.extend_from_slice(&self.item_seed.to_le_bytes());
        out.extend_from_slice(&self.theta.to_bits().to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        let mut labels: Vec<&Label> = self.entries.keys().collect();
        labels.sort();
        for label in labels {
            let entry = &self.entries[label];
            out.extend_from_slice(&(label.bytes().len() as u16).to_le_bytes());
            out.extend_from_slice(label.bytes());
            out.extend_from_slice(&entry.offset.to_bits().to_le_bytes());
            entry.counter.write_bytes(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ParseError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(ParseError::BadMagic { offset: 0 });
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(ParseError::UnsupportedVersion { offset: 4, version });
        }
        let code = r.u8()?;
        let variant = Variant::from_code(code).ok_or(ParseError::BadVariant { offset: 5, code })?;
        let capacity_offset = r.pos;
        let capacity = r.u32()?;
        if capacity == 0 {
            return Err(ParseError::BadCapacity {
                offset: capacity_offset,
            });
        }
        let log2r_offset = r.pos;
        let log2r = r.u16()?;
        if !(4..=16).contains(&log2r) {
            return Err(ParseError::BadRegisterCount {
                offset: log2r_offset,
                log2: log2r,
            });
        }
        let register_count = 1usize << log2r;
        let sample_seed = r.u64()?;
        let register_seed = r.u64()?;
        let theta = r.f64()?;
        let count_offset = r.pos;
        let count = r.u32()?;
        if count > capacity {
            return Err(ParseError::BadEntryCount {
                offset: count_offset,
                count,
                capacity,
            });
        }
        let config =
            HllConfig::new(register_count, register_seed).expect("register count validated above");
        let mut entries = HashMap::with_capacity(count as usize);
        for _ in 0..count {
            let label_offset = r.pos;
            let label_len = r.u16()? as usize;
            let label = Label::new(r.take(label_len)?.to_vec())
                .expect("length fits in u16 by construction");
            let offset = r.f64()?;
            let counter_offset = r.pos;
            let (counter, used) =
                HyperLogLog::from_bytes(&bytes[r.pos..]).map_err(|e| match e {
                    crate::cardinality::HllParseError::Truncated => ParseError::Truncated {
                        offset: counter_offset,
                    },
                    crate::cardinality::HllParseError::BadRegisterCount(_) => {
                        ParseError::CounterMismatch {
                            offset: counter_offset,
                        }
                    }
                })?;
            r.pos += used;
            if counter.register_count() != register_count || counter.seed() != register_seed {
                return Err(ParseError::CounterMismatch {
                    offset: counter_offset,
                });
            }
            if entries
                .insert(label, CounterEntry::fresh(counter, offset))
                .is_some()
            {
                return Err(ParseError::DuplicateLabel {
                    offset: label_offset,
                });
            }
        }
        if r.pos != bytes.len() {
            return Err(ParseError::TrailingBytes { offset: r.pos });
        }
        Ok(Self {
            variant,
            capacity: capacity as usize,
            sample_seed,
            item_seed: register_seed,
            counter_config: config,
            entries,
            theta,
            stats: SketchStats::default(),
        })
    }
}
