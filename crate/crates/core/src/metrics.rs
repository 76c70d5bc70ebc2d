//! Exact ground truth and the error metrics used to grade sketches.
//!
//! Accuracy is reported over two label sets: the actual top k by distinct
//! count (`T_k`) and the sketch's self-reported top k (`S_k`). Grading only
//! one of them hides failure modes — a sketch can be perfect on the true
//! heavy sets while its own top list is garbage, or vice versa — so the
//! headline number `Q_k` is the quadratic mean of the two NAEs, which leans
//! toward the worse one.
//!
//! All metrics are normalized so 0.0 is a perfect sketch and 1.0 matches the
//! all-zero estimator; values above 1.0 are worse than reporting nothing.

use std::collections::{HashMap, HashSet};
use std::error;
use std::fmt;

use crate::cardinality::{hash64, DistinctCounter};
use crate::sketch::{Label, SpaceSavingSets};

// Item-hash seed for ground truth sets, independent of any sketch seed.
const GROUND_TRUTH_SEED: u64 = 0x6772_6F75_6E64;

/// Exact per-label distinct counts, built by replaying the stream.
///
/// Items are stored as 64-bit hashes rather than raw bytes to bound memory;
/// at desk scale (at most ~1e8 items) the collision probability is
/// negligible.
#[derive(Clone, Debug, Default)]
pub struct GroundTruth {
    sets: HashMap<Label, HashSet<u64>>,
    total_entries: u64,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: &Label, item: &[u8]) {
        self.total_entries += 1;
        let hash = hash64(item, GROUND_TRUTH_SEED).bits();
        match self.sets.get_mut(label) {
            Some(set) => {
                set.insert(hash);
            }
            None => {
                self.sets.insert(label.clone(), HashSet::from([hash]));
            }
        }
    }

    /// Exact distinct count for a label, `None` if it never appeared.
    pub fn distinct(&self, label: &Label) -> Option<u64> {
        self.sets.get(label).map(|s| s.len() as u64)
    }

    pub fn label_count(&self) -> usize {
        self.sets.len()
    }

    pub fn total_entries(&self) -> u64 {
        self.total_entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.sets.keys()
    }

    /// The k labels with the largest distinct counts, ties broken by
    /// ascending label; fewer if fewer labels exist.
    pub fn topk(&self, k: usize) -> Vec<Label> {
        let mut ranked: Vec<(&Label, usize)> =
            self.sets.iter().map(|(l, s)| (l, s.len())).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.into_iter().take(k).map(|(l, _)| l.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricsError {
    /// Metrics over an empty label set are undefined.
    EmptyLabelSet,
    /// A graded label never appeared in the stream.
    UnknownLabel(Label),
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::EmptyLabelSet => write!(f, "metric over an empty label set"),
            MetricsError::UnknownLabel(l) => {
                write!(f, "label {l:?} is not in the ground truth")
            }
        }
    }
}

impl error::Error for MetricsError {}

fn truth_pairs(
    estimates: &[(Label, f64)],
    gt: &GroundTruth,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    if estimates.is_empty() {
        return Err(MetricsError::EmptyLabelSet);
    }
    estimates
        .iter()
        .map(|(label, est)| {
            let d = gt
                .distinct(label)
                .ok_or_else(|| MetricsError::UnknownLabel(label.clone()))?;
            Ok((d as f64, *est))
        })
        .collect()
}

/// Normalized absolute error: sum |d - est| / sum d.
pub fn nae(estimates: &[(Label, f64)], gt: &GroundTruth) -> Result<f64, MetricsError> {
    let pairs = truth_pairs(estimates, gt)?;
    let num: f64 = pairs.iter().map(|(d, e)| (d - e).abs()).sum();
    let den: f64 = pairs.iter().map(|(d, _)| d).sum();
    Ok(num / den)
}

/// Normalized root squared error: sqrt(sum (d - est)^2 / sum d^2).
pub fn nrse(estimates: &[(Label, f64)], gt: &GroundTruth) -> Result<f64, MetricsError> {
    let pairs = truth_pairs(estimates, gt)?;
    let num: f64 = pairs.iter().map(|(d, e)| (d - e) * (d - e)).sum();
    let den: f64 = pairs.iter().map(|(d, _)| d * d).sum();
    Ok((num / den).sqrt())
}

/// Relative mean absolute error: mean of |d - est| / d.
pub fn rmae(estimates: &[(Label, f64)], gt: &GroundTruth) -> Result<f64, MetricsError> {
    let pairs = truth_pairs(estimates, gt)?;
    let sum: f64 = pairs.iter().map(|(d, e)| (d - e).abs() / d).sum();
    Ok(sum / pairs.len() as f64)
}

/// Relative root mean square error: sqrt(mean of ((d - est) / d)^2).
pub fn rrmse(estimates: &[(Label, f64)], gt: &GroundTruth) -> Result<f64, MetricsError> {
    let pairs = truth_pairs(estimates, gt)?;
    let sum: f64 = pairs
        .iter()
        .map(|(d, e)| {
            let rel = (d - e) / d;
            rel * rel
        })
        .sum();
    Ok((sum / pairs.len() as f64).sqrt())
}

/// Quadratic mean of the two NAEs, biased toward the worse one.
pub fn qk(nae_s: f64, nae_t: f64) -> f64 {
    ((nae_s * nae_s + nae_t * nae_t) / 2.0).sqrt()
}

/// One evaluated k. The `_t` metrics grade the true top k through the
/// sketch's answers; the `_s` metrics grade the sketch's own top list.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub k: usize,
    pub nae_t: f64,
    pub nae_s: f64,
    pub q: f64,
    pub nrse_t: f64,
    pub nrse_s: f64,
    pub rmae_t: f64,
    pub rmae_s: f64,
    pub rrmse_t: f64,
    pub rrmse_s: f64,
    /// How many labels the sketch actually returned (less than k when the
    /// sketch holds fewer entries).
    pub s_k_size: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn row(&self, k: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    pub const TABLE_HEADER: &'static str =
        "k\tnae_t\tnae_s\tq\tnrse_t\tnrse_s\trmae_t\trmae_s\trrmse_t\trrmse_s\ts_k_size";

    /// Tab-separated table with a header row, one row per k.
    pub fn to_table(&self) -> String {
        let mut out = String::from(Self::TABLE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                r.k,
                r.nae_t,
                r.nae_s,
                r.q,
                r.nrse_t,
                r.nrse_s,
                r.rmae_t,
                r.rmae_s,
                r.rrmse_t,
                r.rrmse_s,
                r.s_k_size
            ));
        }
        out
    }

    /// Line-delimited key=value form of the same data.
    pub fn to_kv_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&format!(
                "k={} nae_t={:.6} nae_s={:.6} q={:.6} nrse_t={:.6} nrse_s={:.6} \
                 rmae_t={:.6} rmae_s={:.6} rrmse_t={:.6} rrmse_s={:.6} s_k_size={}\n",
                r.k,
                r.nae_t,
                r.nae_s,
                r.q,
                r.nrse_t,
                r.nrse_s,
                r.rmae_t,
                r.rmae_s,
                r.rrmse_t,
                r.rrmse_s,
                r.s_k_size
            ));
        }
        out
    }
}

/// Grades a sketch against exact ground truth for each requested k.
///
/// `S_k` estimates come straight from the sketch's top list. `T_k` labels are
/// estimated via `query`, so labels the sketch dropped are answered with its
/// minimum counter value, exactly as a caller would see.
pub fn evaluate<C: DistinctCounter>(
    sketch: &mut SpaceSavingSets<C>,
    gt: &GroundTruth,
    ks: &[usize],
) -> Result<ErrorReport, MetricsError> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let reported = sketch.top(k);
        let truth: Vec<(Label, f64)> = gt
            .topk(k)
            .into_iter()
            .map(|label| {
                let est = sketch.query(&label);
                (label, est)
            })
            .collect();
        let nae_t = nae(&truth, gt)?;
        let nae_s = nae(&reported, gt)?;
        rows.push(ErrorRow {
            k,
            nae_t,
            nae_s,
            q: qk(nae_s, nae_t),
            nrse_t: nrse(&truth, gt)?,
            nrse_s: nrse(&reported, gt)?,
            rmae_t: rmae(&truth, gt)?,
            rmae_s: rmae(&reported, gt)?,
            rrmse_t: rrmse(&truth, gt)?,
            rrmse_s: rrmse(&reported, gt)?,
            s_k_size: reported.len(),
        });
    }
    Ok(ErrorReport { rows })
}
