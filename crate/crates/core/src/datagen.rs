//! Deterministic stream generators and delimited-file ingestion.
//!
//! Everything here is reproducible: the same spec and seed always produce
//! byte-identical streams, so a stream can be replayed for ground truth and
//! sketched without materializing it.

use std::fmt;
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sketch::Label;

/// One (label, item) stream element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub label: Label,
    pub item: Vec<u8>,
}

#[derive(Debug)]
pub enum DatagenError {
    InvalidSpec(String),
    Io(std::io::Error),
    /// The input had lines but none of them yielded an entry.
    NoValidLines,
}

impl fmt::Display for DatagenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatagenError::InvalidSpec(msg) => write!(f, "invalid spec: {msg}"),
            DatagenError::Io(e) => write!(f, "io error: {e}"),
            DatagenError::NoValidLines => write!(f, "input contains no valid lines"),
        }
    }
}

impl std::error::Error for DatagenError {}

impl From<std::io::Error> for DatagenError {
    fn from(e: std::io::Error) -> Self {
        DatagenError::Io(e)
    }
}

/// Stream with labels drawn from a Zipf distribution and fresh random items.
///
/// A small exponent (the reference configuration uses 0.2) gives a fat tail:
/// set sizes shrink so gradually that there is no clean cut between heavy
/// labels and noise, which is the hard case for a bounded sketch.
#[derive(Clone, Debug, PartialEq)]
pub struct ZipfSpec {
    /// Number of distinct labels N; ranks are 1..=N.
    pub labels: u64,
    /// Zipf exponent; label rank r is drawn with probability proportional
    /// to r^-exponent.
    pub exponent: f64,
    /// Stream length m.
    pub entries: u64,
    pub seed: u64,
}

pub struct ZipfStream {
    cumulative: Vec<f64>,
    remaining: u64,
    rng: ChaCha8Rng,
}

/// Labels are decimal ranks ("1" is the heaviest); items are uniform 64-bit
/// values rendered in decimal, so item repeats are negligible.
pub fn gen_zipf(spec: &ZipfSpec) -> Result<ZipfStream, DatagenError> {
    if spec.labels == 0 {
        return Err(DatagenError::InvalidSpec(
            "zipf needs at least one label".into(),
        ));
    }
    if !spec.exponent.is_finite() || spec.exponent <= 0.0 {
        return Err(DatagenError::InvalidSpec(format!(
            "zipf exponent must be a positive real, got {}",
            spec.exponent
        )));
    }
    let mut cumulative = Vec::with_capacity(spec.labels as usize);
    let mut total = 0.0;
    for rank in 1..=spec.labels {
        total += (rank as f64).powf(-spec.exponent);
        cumulative.push(total);
    }
    Ok(ZipfStream {
        cumulative,
        remaining: spec.entries,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    })
}

impl Iterator for ZipfStream {
    type Item = Entry;

    fn next(&mut self) -> Option<Entry> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let total = *self.cumulative.last().expect("table is non-empty");
        let u = self.rng.gen::<f64>() * total;
        let rank = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let label = Label::new((rank as u64 + 1).to_string().into_bytes())
            .expect("decimal rank fits the label limit");
        let item = self.rng.gen::<u64>().to_string().into_bytes();
        Some(Entry { label, item })
    }
}

impl ExactSizeIterator for ZipfStream {
    fn len(&self) -> usize {
        self.remaining as usize
    }
}

/// Stream of sets drawn from a shared universe with heavy overlap.
///
/// `small_sets` sets of `small_set_size` items are drawn from the common
/// pool (the first `common_size` universe items); `heavy_sets` sets of
/// `heavy_set_size` items are drawn from the whole universe. Each set is
/// sampled without replacement, so its true distinct count equals its size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapSpec {
    pub universe_size: u64,
    pub common_size: u64,
    pub small_sets: u64,
    pub small_set_size: u64,
    pub heavy_sets: u64,
    pub heavy_set_size: u64,
    pub seed: u64,
}

pub struct OverlapStream {
    labels: Vec<Label>,
    pairs: std::vec::IntoIter<(u32, u64)>,
}

/// Small sets are labeled "s0", "s1", ...; heavy sets "h0", "h1", ....
/// Entries are emitted in a seeded global shuffle.
pub fn gen_overlap(spec: &OverlapSpec) -> Result<OverlapStream, DatagenError> {
    if spec.universe_size == 0 {
        return Err(DatagenError::InvalidSpec(
            "universe must not be empty".into(),
        ));
    }
    if spec.common_size > spec.universe_size {
        return Err(DatagenError::InvalidSpec(format!(
            "common pool of {} exceeds universe of {}",
            spec.common_size, spec.universe_size
        )));
    }
    if spec.small_sets > 0 {
        if spec.small_set_size == 0 {
            return Err(DatagenError::InvalidSpec(
                "small sets must not be empty".into(),
            ));
        }
        if spec.small_set_size > spec.common_size {
            return Err(DatagenError::InvalidSpec(format!(
                "small sets of {} items cannot be drawn from a common pool of {}",
                spec.small_set_size, spec.common_size
            )));
        }
    }
    if spec.heavy_sets > 0 {
        if spec.heavy_set_size == 0 {
            return Err(DatagenError::InvalidSpec(
                "heavy sets must not be empty".into(),
            ));
        }
        if spec.heavy_set_size > spec.universe_size {
            return Err(DatagenError::InvalidSpec(format!(
                "heavy sets of {} items cannot be drawn from a universe of {}",
                spec.heavy_set_size, spec.universe_size
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels = Vec::with_capacity((spec.small_sets + spec.heavy_sets) as usize);
    let total_entries =
        spec.small_sets * spec.small_set_size + spec.heavy_sets * spec.heavy_set_size;
    let mut pairs: Vec<(u32, u64)> = Vec::with_capacity(total_entries as usize);
    for i in 0..spec.small_sets {
        let idx = labels.len() as u32;
        labels.push(Label::new(format!("s{i}").into_bytes()).expect("short label"));
        for item in rand::seq::index::sample(
            &mut rng,
            spec.common_size as usize,
            spec.small_set_size as usize,
        ) {
            pairs.push((idx, item as u64));
        }
    }
    for i in 0..spec.heavy_sets {
        let idx = labels.len() as u32;
        labels.push(Label::new(format!("h{i}").into_bytes()).expect("short label"));
        for item in rand::seq::index::sample(
            &mut rng,
            spec.universe_size as usize,
            spec.heavy_set_size as usize,
        ) {
            pairs.push((idx, item as u64));
        }
    }
    pairs.shuffle(&mut rng);
    Ok(OverlapStream {
        labels,
        pairs: pairs.into_iter(),
    })
}

impl Iterator for OverlapStream {
    type Item = Entry;

    fn next(&mut self) -> Option<Entry> {
        let (idx, item) = self.pairs.next()?;
        Some(Entry {
            label: self.labels[idx as usize].clone(),
            item: item.to_string().into_bytes(),
        })
    }
}

impl ExactSizeIterator for OverlapStream {
    fn len(&self) -> usize {
        self.pairs.len()
    }
}

/// Streaming reader over a delimited text file.
///
/// Lines missing the label or item column (or with an oversized label) are
/// skipped and counted rather than failing the whole file; I/O errors still
/// stop the stream.
pub struct DelimitedReader {
    reader: csv::Reader<File>,
    record: csv::ByteRecord,
    label_col: usize,
    item_col: usize,
    lines: u64,
    skipped: u64,
}

pub fn read_delimited(
    path: &Path,
    delimiter: u8,
    label_col: usize,
    item_col: usize,
) -> Result<DelimitedReader, DatagenError> {
    let file = File::open(path)?;
    let reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    Ok(DelimitedReader {
        reader,
        record: csv::ByteRecord::new(),
        label_col,
        item_col,
        lines: 0,
        skipped: 0,
    })
}

impl DelimitedReader {
    /// Lines that did not produce an entry.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn lines_read(&self) -> u64 {
        self.lines
    }
}

impl Iterator for DelimitedReader {
    type Item = Result<Entry, DatagenError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.reader.read_byte_record(&mut self.record) {
                Ok(false) => return None,
                Ok(true) => {
                    self.lines += 1;
                    let label = self.record.get(self.label_col);
                    let item = self.record.get(self.item_col);
                    match (label, item) {
                        (Some(label), Some(item)) => match Label::new(label.to_vec()) {
                            Ok(label) => {
                                return Some(Ok(Entry {
                                    label,
                                    item: item.to_vec(),
                                }))
                            }
                            Err(_) => self.skipped += 1,
                        },
                        _ => self.skipped += 1,
                    }
                }
                Err(e) => {
                    self.lines += 1;
                    if e.is_io_error() {
                        match e.into_kind() {
                            csv::ErrorKind::Io(io) => return Some(Err(DatagenError::Io(io))),
                            _ => unreachable!("is_io_error guarantees an io kind"),
                        }
                    }
                    // malformed record (e.g. bad quoting): skip it
                    self.skipped += 1;
                }
            }
        }
    }
}

/// Reads the whole file, failing if it had lines but produced no entries.
/// Returns the entries and the skipped-line count.
pub fn read_all(
    path: &Path,
    delimiter: u8,
    label_col: usize,
    item_col: usize,
) -> Result<(Vec<Entry>, u64), DatagenError> {
    let mut reader = read_delimited(path, delimiter, label_col, item_col)?;
    let mut entries = Vec::new();
    for entry in &mut reader {
        entries.push(entry?);
    }
    if entries.is_empty() && reader.lines_read() > 0 {
        return Err(DatagenError::NoValidLines);
    }
    Ok((entries, reader.skipped()))
}
