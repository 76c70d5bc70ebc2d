//! Count-distinct counters and the hashing layer shared by the whole crate.
//!
//! Two counters are provided behind the [`DistinctCounter`] trait:
//! [`HyperLogLog`], the production estimator, and [`ExactCounter`], a
//! hash-set reference with zero error that serves as the oracle in tests.
//! Both are monotone: the value reported by `distinct` never decreases, no
//! matter how inserts and merges are interleaved.

use std::collections::HashSet;
use std::error;
use std::fmt;

/// Default seed for [`hash64`] when the caller has no reason to pick one.
pub const DEFAULT_SEED: u64 = 0;

/// A 64-bit digest produced by [`hash64`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HashValue(u64);

impl HashValue {
    pub fn from_bits(bits: u64) -> Self {
        Self(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// Maps the digest uniformly to the open unit interval.
    ///
    /// The value is (bits + 0.5) / 2^64, clamped to the largest double below
    /// 1.0 (the exact quotient rounds to 1.0 for the topmost digests), so the
    /// result is strictly inside (0, 1) and 1/u is always finite.
    pub fn unit_interval(self) -> f64 {
        const TWO_64: f64 = 18_446_744_073_709_551_616.0;
        let u = (self.0 as f64 + 0.5) / TWO_64;
        u.min(1.0 - f64::EPSILON / 2.0)
    }
}

/// Seeded 64-bit mixing hash used everywhere determinism matters.
///
/// Same (bytes, seed) always yields the same digest; changing the seed
/// selects a different member of the family. Backed by xxHash64.
pub fn hash64(bytes: &[u8], seed: u64) -> HashValue {
    HashValue(xxhash_rust::xxh64::xxh64(bytes, seed))
}

/// Merging counters (or sketches built on them) with different
/// configurations is refused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MergeError {
    ConfigMismatch,
}

impl fmt::Display for MergeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeError::ConfigMismatch => write!(f, "counter configs do not match"),
        }
    }
}

impl error::Error for MergeError {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigError {
    /// Register count must be a power of two in 16..=65536.
    BadRegisterCount(usize),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::BadRegisterCount(n) => {
                write!(f, "register count {n} is not a power of two in 16..=65536")
            }
        }
    }
}

impl error::Error for ConfigError {}

/// Contract shared by all count-distinct counters.
///
/// Implementations must be monotone (estimates only grow as items are added)
/// and idempotent under duplicate inserts of the same item hash.
pub trait DistinctCounter: Clone {
    type Config: Clone + PartialEq + fmt::Debug;

    fn new(config: &Self::Config) -> Self;

    /// Adds a pre-hashed item.
    fn insert(&mut self, item: HashValue);

    /// Reports the current cardinality estimate. Successive reports with no
    /// intervening inserts return the same value; reports never decrease.
    fn distinct(&mut self) -> f64;

    /// Folds `other` in, so the result estimates the union of both item sets.
    fn merge(&mut self, other: &Self) -> Result<(), MergeError>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HllConfig {
    register_count: usize,
    seed: u64,
}

impl HllConfig {
    pub fn new(register_count: usize, seed: u64) -> Result<Self, ConfigError> {
        if !register_count.is_power_of_two() || !(16..=65536).contains(&register_count) {
            return Err(ConfigError::BadRegisterCount(register_count));
        }
        Ok(Self {
            register_count,
            seed,
        })
    }

    pub fn register_count(&self) -> usize {
        self.register_count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// HyperLogLog with a monotone reporting watermark.
///
/// Registers are selected by the low log2(r) bits of the item hash; the
/// candidate register value is the number of leading zeros of the remaining
/// bits plus one. The estimator is the classic harmonic mean with the
/// small-range linear-counting correction. The raw estimate can dip when the
/// estimator switches out of the linear-counting regime, so reports go
/// through a watermark: `distinct` returns the max of the raw estimate and
/// every previous report, which makes the reported sequence non-decreasing.
///
/// The expected relative error is roughly 1.04/sqrt(r).
#[derive(Clone, Debug, PartialEq)]
pub struct HyperLogLog {
    registers: Vec<u8>,
    log2m: u8,
    seed: u64,
    watermark: f64,
}

impl HyperLogLog {
    pub fn new(config: &HllConfig) -> Self {
        Self {
            registers: vec![0; config.register_count],
            log2m: config.register_count.trailing_zeros() as u8,
            seed: config.seed,
            watermark: 0.0,
        }
    }

    pub fn register_count(&self) -> usize {
        self.registers.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn registers(&self) -> &[u8] {
        &self.registers
    }

    pub fn watermark(&self) -> f64 {
        self.watermark
    }

    fn raw_estimate(&self) -> f64 {
        let m = self.registers.len() as f64;
        let mut sum = 0.0;
        for &r in &self.registers {
            sum += 1.0 / (1u64 << r) as f64;
        }
        let alpha = match self.registers.len() {
            16 => 0.673,
            32 => 0.697,
            64 => 0.709,
            len => 0.7213 / (1.0 + 1.079 / len as f64),
        };
        let raw = alpha * m * m / sum;
        if raw <= 2.5 * m {
            let zeros = self.registers.iter().filter(|&&r| r == 0).count();
            if zeros > 0 {
                return m * (m / zeros as f64).ln();
            }
        }
        raw
    }

    /// Number of bytes `to_bytes` produces for a given register count.
    pub fn serialized_len(register_count: usize) -> usize {
        2 + 8 + 8 + register_count * 6 / 8
    }

    /// Layout: u16 log2(r), u64 seed, u64 watermark bits, then the registers
    /// packed 6 bits each in little-endian bit order. Round-trips bit-exactly.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::serialized_len(self.registers.len()));
        self.write_bytes(&mut out);
        out
    }

    pub(crate) fn write_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&u16::from(self.log2m).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.watermark.to_bits().to_le_bytes());
        let mut acc: u32 = 0;
        let mut nbits = 0;
        for &r in &self.registers {
            acc |= u32::from(r) << nbits;
            nbits += 6;
            while nbits >= 8 {
                out.push(acc as u8);
                acc >>= 8;
                nbits -= 8;
            }
        }
        // register counts are multiples of four, so the bit stream ends on a
        // byte boundary
        debug_assert_eq!(nbits, 0);
    }

    /// Parses a counter from the front of `bytes`, returning it along with
    /// the number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize), HllParseError> {
        if bytes.len() < 2 {
            return Err(HllParseError::Truncated);
        }
        let log2m = u16::from_le_bytes([bytes[0], bytes[1]]);
        if !(4..=16).contains(&log2m) {
            return Err(HllParseError::BadRegisterCount(log2m));
        }
        let register_count = 1usize << log2m;
        let total = Self::serialized_len(register_count);
        if bytes.len() < total {
            return Err(HllParseError::Truncated);
        }
        let seed = u64::from_le_bytes(bytes[2..10].try_into().unwrap());
        let watermark = f64::from_bits(u64::from_le_bytes(bytes[10..18].try_into().unwrap()));
        let mut registers = Vec::with_capacity(register_count);
        let mut acc: u32 = 0;
        let mut nbits = 0;
        for &b in &bytes[18..total] {
            acc |= u32::from(b) << nbits;
            nbits += 8;
            while nbits >= 6 && registers.len() < register_count {
                registers.push((acc & 0x3F) as u8);
                acc >>= 6;
                nbits -= 6;
            }
        }
        Ok((
            Self {
                registers,
                log2m: log2m as u8,
                seed,
                watermark,
            },
            total,
        ))
    }
}

impl DistinctCounter for HyperLogLog {
    type Config = HllConfig;

    fn new(config: &HllConfig) -> Self {
        HyperLogLog::new(config)
    }

    #[inline]
    fn insert(&mut self, item: HashValue) {
        let bits = item.bits();
        let p = u32::from(self.log2m);
        let idx = (bits & (self.registers.len() as u64 - 1)) as usize;
        let rest = bits >> p;
        let rank = if rest == 0 {
            64 - p + 1
        } else {
            rest.leading_zeros() - p + 1
        } as u8;
        if self.registers[idx] < rank {
            self.registers[idx] = rank;
        }
    }

    fn distinct(&mut self) -> f64 {
        let est = self.raw_estimate().max(self.watermark);
        self.watermark = est;
        est
    }

    fn merge(&mut self, other: &Self) -> Result<(), MergeError> {
        if self.log2m != other.log2m || self.seed != other.seed {
            return Err(MergeError::ConfigMismatch);
        }
        for (a, &b) in self.registers.iter_mut().zip(&other.registers) {
            if *a < b {
                *a = b;
            }
        }
        self.watermark = self.watermark.max(other.watermark);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HllParseError {
    Truncated,
    BadRegisterCount(u16),
}

impl fmt::Display for HllParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HllParseError::Truncated => write!(f, "counter payload is truncated"),
            HllParseError::BadRegisterCount(n) => {
                write!(f, "counter payload declares bad log2 register count {n}")
            }
        }
    }
}

impl error::Error for HllParseError {}

/// Reference counter that stores every item hash it has seen. Zero error,
/// unbounded memory; used as the oracle in tests and property checks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExactCounter {
    items: HashSet<u64>,
}

impl ExactCounter {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DistinctCounter for ExactCounter {
    type Config = ();

    fn new(_: &()) -> Self {
        Self::default()
    }

    fn insert(&mut self, item: HashValue) {
        self.items.insert(item.bits());
    }

    fn distinct(&mut self) -> f64 {
        self.items.len() as f64
    }

    fn merge(&mut self, other: &Self) -> Result<(), MergeError> {
        self.items.extend(&other.items);
        Ok(())
    }
}
