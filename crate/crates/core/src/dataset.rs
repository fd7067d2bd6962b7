//! The `M × n` bit-array sample model.
//!
//! A sample is `M` measured bit-strings of `n` qubits each. Rows are stored
//! row-major as bytes in `{0, 1}`; column `i` is qubit `a_i`, in file order.
//!
//! Rows are read as integers big-endian: the leftmost character of a row is
//! the most significant bit, `x = Σ a_i · 2^(n-1-i)`. Every analysis that maps
//! a bit-string to an outcome index uses this convention.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

/// Widest sample for which an outcome histogram is built.
pub const MAX_HISTOGRAM_QUBITS: usize = 30;

/// Widest sample whose rows fit a `u64`.
pub const MAX_INTEGER_QUBITS: usize = 64;

/// Histograms up to this many outcomes are exported densely, zero counts included.
const DENSE_EXPORT_OUTCOMES: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("`{0}` is not a measurements_n<N>_m<M>_s<S>_e<E>_p<PATTERN>.txt file name")]
    MalformedName(String),
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("the sample file contains no bit-strings")]
    EmptyFile,
    #[error("{n} qubits exceed the limit of {max} for this operation")]
    TooWide { n: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Two-qubit coupler activation pattern of the source experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Efgh,
    Abcdcdab,
    Other(String),
}

impl Pattern {
    fn parse(s: &str) -> Self {
        match s {
            "EFGH" => Pattern::Efgh,
            "ABCDCDAB" => Pattern::Abcdcdab,
            other => Pattern::Other(other.to_string()),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Efgh => f.write_str("EFGH"),
            Pattern::Abcdcdab => f.write_str("ABCDCDAB"),
            Pattern::Other(s) => f.write_str(s),
        }
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    GoogleFile,
    ClassicalPrng,
    CueSampler,
    /// A file without a parseable name; metadata was inferred from its content.
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n_qubits: usize,
    /// Circuit depth `m`; `None` for generated samples.
    pub cycles: Option<u32>,
    /// Circuit seed `s` for experiment files, generator seed otherwise.
    pub seed: u64,
    /// Elided gate count `e`.
    pub elided: Option<u32>,
    pub pattern: Option<Pattern>,
    pub source: Source,
    pub label: String,
}

impl SampleMeta {
    /// Metadata for a generated sample.
    pub fn generated(source: Source, n_qubits: usize, seed: u64, label: impl Into<String>) -> Self {
        SampleMeta {
            n_qubits,
            cycles: None,
            seed,
            elided: None,
            pattern: None,
            source,
            label: label.into(),
        }
    }

    pub fn unlabeled(n_qubits: usize, label: impl Into<String>) -> Self {
        Self::generated(Source::Unlabeled, n_qubits, 0, label)
    }
}

/// Parse an experiment file name such as `measurements_n53_m20_s0_e0_pABCDCDAB.txt`.
///
/// Directory components are ignored.
pub fn parse_meta(filename: &str) -> Result<SampleMeta, DatasetError> {
    let malformed = || DatasetError::MalformedName(filename.to_string());
    let base = Path::new(filename)
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(malformed)?;
    let stem = base
        .strip_prefix("measurements_")
        .and_then(|s| s.strip_suffix(".txt"))
        .ok_or_else(malformed)?;

    let mut parts = stem.splitn(5, '_');
    let mut field = |tag: char| -> Result<&str, DatasetError> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(tag))
            .filter(|v| !v.is_empty())
            .ok_or_else(malformed)
    };
    let n = field('n')?;
    let m = field('m')?;
    let s = field('s')?;
    let e = field('e')?;
    let p = field('p')?;

    let n_qubits: usize = n.parse().map_err(|_| malformed())?;
    if n_qubits == 0 || !p.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(malformed());
    }
    Ok(SampleMeta {
        n_qubits,
        cycles: Some(m.parse().map_err(|_| malformed())?),
        seed: s.parse().map_err(|_| malformed())?,
        elided: Some(e.parse().map_err(|_| malformed())?),
        pattern: Some(Pattern::parse(p)),
        source: Source::GoogleFile,
        label: base.trim_end_matches(".txt").to_string(),
    })
}

/// An `M × n` array of measured bits.
#[derive(Debug, Clone, PartialEq)]
pub struct BitArray {
    meta: SampleMeta,
    rows: usize,
    bits: Vec<u8>,
}

impl BitArray {
    /// Build from row-major bits. `bits.len()` must be a non-zero multiple of
    /// `meta.n_qubits` and every entry must be 0 or 1.
    pub fn new(meta: SampleMeta, bits: Vec<u8>) -> Result<Self, DatasetError> {
        let n = meta.n_qubits;
        if n == 0 {
            return Err(DatasetError::InvalidParameter("n_qubits must be at least 1".into()));
        }
        if bits.is_empty() {
            return Err(DatasetError::EmptyFile);
        }
        if !bits.len().is_multiple_of(n) {
            return Err(DatasetError::InvalidParameter(format!(
                "{} bits do not divide into rows of {n}",
                bits.len()
            )));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(DatasetError::BadRow {
                line: pos / n + 1,
                reason: format!("entry {} is not a bit", bits[pos]),
            });
        }
        Ok(BitArray { rows: bits.len() / n, meta, bits })
    }

    /// Build from bit-string rows such as `"0101"`.
    pub fn from_strings<S: AsRef<str>>(meta: SampleMeta, rows: &[S]) -> Result<Self, DatasetError> {
        let mut bits = Vec::with_capacity(rows.len() * meta.n_qubits);
        for (i, row) in rows.iter().enumerate() {
            parse_row(row.as_ref(), meta.n_qubits, i + 1, &mut bits)?;
        }
        Self::new(meta, bits)
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }

    pub fn n_qubits(&self) -> usize {
        self.meta.n_qubits
    }

    /// Number of bit-strings `M`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let n = self.n_qubits();
        &self.bits[i * n..(i + 1) * n]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.bits.chunks_exact(self.n_qubits())
    }

    /// All bits, row after row.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn ones(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    /// Overall fraction of ones, `p(1)`.
    pub fn one_fraction(&self) -> f64 {
        self.ones() as f64 / self.bits.len() as f64
    }

    /// Per-qubit count of ones over all rows.
    pub fn column_ones(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_qubits()];
        for row in self.iter_rows() {
            for (c, &b) in counts.iter_mut().zip(row) {
                *c += b as u64;
            }
        }
        counts
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.meta.label = label.into();
        self
    }

    /// Write in the measurement text format: one row per line, LF-terminated.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut line = Vec::with_capacity(self.n_qubits() + 1);
        for row in self.iter_rows() {
            line.clear();
            line.extend(row.iter().map(|&b| b'0' + b));
            line.push(b'\n');
            out.write_all(&line)?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }
}

fn parse_row(line: &str, n: usize, line_no: usize, out: &mut Vec<u8>) -> Result<(), DatasetError> {
    let bad = |reason: String| DatasetError::BadRow { line: line_no, reason };
    if line.len() != n {
        return Err(bad(format!("expected {n} bits, found {} characters", line.chars().count())));
    }
    for c in line.bytes() {
        match c {
            b'0' => out.push(0),
            b'1' => out.push(1),
            other => return Err(bad(format!("unexpected character {:?}", other as char))),
        }
    }
    Ok(())
}

/// Read a sample in the measurement text format.
///
/// Surrounding whitespace (including CR) is stripped and blank lines are
/// skipped. Reported line numbers are physical, 1-based.
pub fn read_bitarray<R: BufRead>(reader: R, meta: SampleMeta) -> Result<BitArray, DatasetError> {
    let n = meta.n_qubits;
    let mut bits = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        parse_row(line, n, i + 1, &mut bits)?;
    }
    if bits.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    BitArray::new(meta, bits)
}

pub fn load_bitarray(path: &Path, meta: SampleMeta) -> Result<BitArray, DatasetError> {
    read_bitarray(BufReader::new(File::open(path)?), meta)
}

/// Load a file, taking metadata from its name when it follows the experiment
/// naming scheme and inferring the width from the first row otherwise.
pub fn load_auto(path: &Path) -> Result<BitArray, DatasetError> {
    let name = path.to_string_lossy();
    if let Ok(meta) = parse_meta(&name) {
        return load_bitarray(path, meta);
    }
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let mut first = None;
    for line in lines.by_ref() {
        let line = line?;
        if !line.trim().is_empty() {
            first = Some(line.trim().to_string());
            break;
        }
    }
    let first = first.ok_or(DatasetError::EmptyFile)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let meta = SampleMeta::unlabeled(first.len(), label);
    load_bitarray(path, meta)
}

/// Independent Bernoulli(`p1`) bits from the crate's seeded generator.
pub fn generate_classical(n: usize, rows: usize, seed: u64, p1: f64) -> Result<BitArray, DatasetError> {
    if n == 0 || rows == 0 {
        return Err(DatasetError::InvalidParameter(format!(
            "need n >= 1 and M >= 1, got n={n}, M={rows}"
        )));
    }
    if !(0.0..=1.0).contains(&p1) {
        return Err(DatasetError::InvalidParameter(format!("p1={p1} is not a probability")));
    }
    let mut rng = stream_rng(seed, 0);
    let bits: Vec<u8> = (0..n * rows).map(|_| rng.random_bool(p1) as u8).collect();
    let meta = SampleMeta::generated(
        Source::ClassicalPrng,
        n,
        seed,
        format!("classical_n{n}_M{rows}_p{p1}_s{seed}"),
    );
    BitArray::new(meta, bits)
}

/// Counts `b_x` of each outcome `x`, stored sparsely (occupied outcomes only).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeHistogram {
    n_qubits: usize,
    /// Sorted by outcome, counts all non-zero.
    occupied: Vec<(u64, u64)>,
    total: u64,
}

impl OutcomeHistogram {
    /// Build from observed outcomes.
    pub fn from_outcomes(n_qubits: usize, mut outcomes: Vec<u64>) -> Self {
        outcomes.sort_unstable();
        let mut occupied: Vec<(u64, u64)> = Vec::new();
        for x in &outcomes {
            match occupied.last_mut() {
                Some((last, c)) if last == x => *c += 1,
                _ => occupied.push((*x, 1)),
            }
        }
        OutcomeHistogram { n_qubits, occupied, total: outcomes.len() as u64 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of possible outcomes `N = 2^n`.
    pub fn dim(&self) -> u64 {
        1u64 << self.n_qubits
    }

    /// Number of observations `M`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, x: u64) -> u64 {
        self.occupied
            .binary_search_by_key(&x, |&(k, _)| k)
            .map(|i| self.occupied[i].1)
            .unwrap_or(0)
    }

    /// Empirical probability `p_x = b_x / M`.
    pub fn probability(&self, x: u64) -> f64 {
        self.count(x) as f64 / self.total as f64
    }

    /// Occupied outcomes with their counts, ascending in `x`.
    pub fn occupied(&self) -> &[(u64, u64)] {
        &self.occupied
    }

    /// Dense counts for every `x` in `[0, N)`.
    pub fn dense_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.dim() as usize];
        for &(x, c) in &self.occupied {
            counts[x as usize] = c;
        }
        counts
    }

    /// CSV with columns `x,count,p`. Small histograms list every outcome,
    /// larger ones only the occupied outcomes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,count,p")?;
        let m = self.total as f64;
        if self.dim() <= DENSE_EXPORT_OUTCOMES {
            for (x, c) in self.dense_counts().into_iter().enumerate() {
                writeln!(out, "{x},{c},{}", c as f64 / m)?;
            }
        } else {
            for &(x, c) in &self.occupied {
                writeln!(out, "{x},{c},{}", c as f64 / m)?;
            }
        }
        out.flush()
    }
}

/// Histogram of outcomes; refuses samples wider than [`MAX_HISTOGRAM_QUBITS`].
pub fn to_histogram(a: &BitArray) -> Result<OutcomeHistogram, DatasetError> {
    let n = a.n_qubits();
    if n > MAX_HISTOGRAM_QUBITS {
        return Err(DatasetError::TooWide { n, max: MAX_HISTOGRAM_QUBITS });
    }
    Ok(OutcomeHistogram::from_outcomes(n, rows_as_integers(a)?))
}

/// Each row as a big-endian integer, in row order.
pub fn rows_as_integers(a: &BitArray) -> Result<Vec<u64>, DatasetError> {
    let n = a.n_qubits();
    if n > MAX_INTEGER_QUBITS {
        return Err(DatasetError::TooWide { n, max: MAX_INTEGER_QUBITS });
    }
    Ok(a.iter_rows().map(row_to_integer).collect())
}

pub(crate) fn row_to_integer(row: &[u8]) -> u64 {
    row.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}
