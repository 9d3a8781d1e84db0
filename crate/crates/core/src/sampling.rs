//! Measurement records: drawing outcome strings, aggregating them into
//! distinct strings with multiplicities, and the dataset text format.
//!
//! Dataset file layout (one item per line, `\n` terminated):
//!
//! ```text
//! nntt-samples 1
//! sites <L>
//! total <N>
//! seed <seed>
//! stream <stream id>
//! <L base-4 digits> <count>
//! ...
//! ```
//!
//! Records are sorted lexicographically by outcome string and every string
//! appears once.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::povm::OUTCOMES;
use crate::rng::{stream_rng, TEST_STREAM, TRAIN_STREAM};
use crate::scalar::Real;
use crate::states::{outcome_string, DenseDistribution, MAX_DENSE_SITES};

const MAGIC: &str = "nntt-samples 1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleEntry {
    pub outcome: Vec<u8>,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSet {
    sites: usize,
    total: u64,
    seed: u64,
    stream: u64,
    entries: Vec<SampleEntry>,
}

impl SampleSet {
    /// Builds a set from `(outcome, count)` records. Records for the same
    /// string are merged; zero counts are dropped.
    pub fn from_counts(
        sites: usize,
        seed: u64,
        stream: u64,
        records: impl IntoIterator<Item = (Vec<u8>, u64)>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        for (outcome, count) in records {
            check_outcome(sites, &outcome)?;
            if count > 0 {
                *merged.entry(outcome).or_default() += count;
            }
        }
        let entries: Vec<SampleEntry> =
            merged.into_iter().map(|(outcome, count)| SampleEntry { outcome, count }).collect();
        let total = entries.iter().map(|e| e.count).sum();
        Ok(Self { sites, total, seed, stream, entries })
    }

    /// Aggregates raw draws; the result does not depend on draw order.
    pub fn from_draws(
        sites: usize,
        seed: u64,
        stream: u64,
        draws: impl IntoIterator<Item = Vec<u8>>,
    ) -> Result<Self> {
        Self::from_counts(sites, seed, stream, draws.into_iter().map(|d| (d, 1)))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn entries(&self) -> &[SampleEntry] {
        &self.entries
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Empirical frequency `n_j / N` of every distinct string.
    pub fn frequencies<T: Real>(&self) -> Vec<T> {
        let n = self.total as f64;
        self.entries.iter().map(|e| T::lit(e.count as f64 / n)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut sum = 0u64;
        for (i, e) in self.entries.iter().enumerate() {
            check_outcome(self.sites, &e.outcome)?;
            if e.count == 0 {
                return Err(Error::Validation(format!("record {i} has zero count")));
            }
            if i > 0 && self.entries[i - 1].outcome >= e.outcome {
                return Err(Error::Validation(format!("record {i} is out of order or repeated")));
            }
            sum += e.count;
        }
        if sum != self.total {
            return Err(Error::Validation(format!(
                "counts sum to {sum} but total is {}",
                self.total
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "sites {}", self.sites).unwrap();
        writeln!(out, "total {}", self.total).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "stream {}", self.stream).unwrap();
        for e in &self.entries {
            for &a in &e.outcome {
                out.push(char::from(b'0' + a));
            }
            writeln!(out, " {}", e.count).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))
        };
        let (ln, magic) = next("header")?;
        if magic.trim() != MAGIC {
            return Err(Error::parse(ln, format!("expected '{MAGIC}'")));
        }
        let mut header = |key: &str| -> Result<u64> {
            let (ln, line) = next(key)?;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(k), Some(v), None) if k == key => v
                    .parse()
                    .map_err(|_| Error::parse(ln, format!("invalid value for '{key}': {v}"))),
                _ => Err(Error::parse(ln, format!("expected '{key} <value>'"))),
            }
        };
        let sites = header("sites")? as usize;
        let total = header("total")?;
        let seed = header("seed")?;
        let stream = header("stream")?;
        if sites == 0 {
            return Err(Error::parse(2, "sites must be positive"));
        }

        let mut entries: Vec<SampleEntry> = Vec::new();
        let mut sum = 0u64;
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (digits, count) = match (parts.next(), parts.next(), parts.next()) {
                (Some(d), Some(c), None) => (d, c),
                _ => return Err(Error::parse(ln, "expected '<outcome> <count>'")),
            };
            if digits.len() != sites {
                return Err(Error::parse(
                    ln,
                    format!("outcome '{digits}' has {} symbols, expected {sites}", digits.len()),
                ));
            }
            let outcome = digits
                .bytes()
                .map(|b| match b {
                    b'0'..=b'3' => Ok(b - b'0'),
                    _ => Err(Error::parse(ln, format!("invalid outcome symbol '{}'", b as char))),
                })
                .collect::<Result<Vec<u8>>>()?;
            let count: u64 =
                count.parse().map_err(|_| Error::parse(ln, format!("invalid count '{count}'")))?;
            if count == 0 {
                return Err(Error::parse(ln, "zero count"));
            }
            if let Some(prev) = entries.last() {
                if prev.outcome >= outcome {
                    return Err(Error::parse(ln, "records must be strictly increasing"));
                }
            }
            sum = sum
                .checked_add(count)
                .ok_or_else(|| Error::parse(ln, "count overflow"))?;
            entries.push(SampleEntry { outcome, count });
        }
        if sum != total {
            return Err(Error::parse(
                3,
                format!("header total {total} does not match record sum {sum}"),
            ));
        }
        Ok(Self { sites, total, seed, stream, entries })
    }
}

fn check_outcome(sites: usize, outcome: &[u8]) -> Result<()> {
    if outcome.len() != sites {
        return Err(Error::Validation(format!(
            "outcome of length {} for {sites} sites",
            outcome.len()
        )));
    }
    if let Some(&bad) = outcome.iter().find(|&&a| a as usize >= OUTCOMES) {
        return Err(Error::Validation(format!("outcome symbol {bad} outside 0..4")));
    }
    Ok(())
}

/// Cumulative distribution in f64 after clipping tiny negatives. Tolerances
/// scale with the precision of `T`.
fn cumulative<T: Real>(dist: &DenseDistribution<T>) -> Result<Vec<f64>> {
    let eps = T::default_epsilon().as_f64();
    let (neg_tol, sum_tol) = ((1e4 * eps).max(1e-12), (1e4 * eps).max(1e-8));
    let mut acc = 0.0;
    let mut last_positive = 0;
    let mut cdf = Vec::with_capacity(dist.probs().len());
    for (i, p) in dist.probs().iter().enumerate() {
        let p = p.as_f64();
        if !p.is_finite() || p < -neg_tol {
            return Err(Error::Validation(format!("probability {p:e} at index {i}")));
        }
        if p > 0.0 {
            last_positive = i;
        }
        acc += p.max(0.0);
        cdf.push(acc);
    }
    if !((acc - 1.0).abs() <= sum_tol) {
        return Err(Error::Validation(format!("distribution sums to {acc}, not 1")));
    }
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    // Close the CDF at the last positive entry so every u in [0, 1) lands on
    // an outcome with nonzero probability.
    for c in &mut cdf[last_positive..] {
        *c = 1.0;
    }
    Ok(cdf)
}

/// `n` i.i.d. draws from substream `stream` of `seed`.
pub fn sample_stream<T: Real>(
    dist: &DenseDistribution<T>,
    n: u64,
    seed: u64,
    stream: u64,
) -> Result<SampleSet> {
    if dist.sites() > MAX_DENSE_SITES {
        return Err(Error::Capacity(format!(
            "dense sampling is limited to {MAX_DENSE_SITES} sites"
        )));
    }
    let cdf = cumulative(dist)?;
    let mut counts = vec![0u64; cdf.len()];
    let mut rng = stream_rng(seed, stream);
    for _ in 0..n {
        let u: f64 = rng.gen();
        counts[cdf.partition_point(|&c| c <= u)] += 1;
    }
    let entries = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(idx, &count)| SampleEntry { outcome: outcome_string(idx, dist.sites()), count })
        .collect();
    Ok(SampleSet { sites: dist.sites(), total: n, seed, stream, entries })
}

/// `n` i.i.d. draws by inverse CDF over lexicographic outcome order.
pub fn sample_dataset<T: Real>(dist: &DenseDistribution<T>, n: u64, seed: u64) -> Result<SampleSet> {
    sample_stream(dist, n, seed, TRAIN_STREAM)
}

/// Two independent datasets of `n` draws each from the train and test
/// substreams of `seed`.
pub fn split_train_test<T: Real>(
    dist: &DenseDistribution<T>,
    n: u64,
    seed: u64,
) -> Result<(SampleSet, SampleSet)> {
    Ok((sample_stream(dist, n, seed, TRAIN_STREAM)?, sample_stream(dist, n, seed, TEST_STREAM)?))
}

pub fn save_samples(set: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, set.to_text())?;
    Ok(())
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<SampleSet> {
    SampleSet::parse(&fs::read_to_string(path)?)
}
