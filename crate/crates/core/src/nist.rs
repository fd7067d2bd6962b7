//! A subset of the NIST SP 800-22 randomness tests over flattened bit arrays.
//!
//! Every test returns a [`TestReport`] with one or more p-values and an
//! R/N/U verdict at significance [`ALPHA`]. Test functions enforce only
//! what they need structurally (enough bits for one block, and so on);
//! [`run_battery`] additionally applies the recommended minimum lengths and
//! marks tests that fall short as skipped.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BitArray, SampleMeta};
use crate::stats::{erfc, igamc};

pub const ALPHA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NistError {
    #[error("test {test} needs at least {min} bits, the stream has {len}")]
    StreamTooShort { test: TestId, len: usize, min: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Tests in battery order. Numbers follow the common 16-test listing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestId {
    #[serde(rename = "01")]
    Frequency,
    #[serde(rename = "02")]
    BlockFrequency,
    #[serde(rename = "03")]
    Runs,
    #[serde(rename = "04")]
    LongestRun,
    #[serde(rename = "05")]
    MatrixRank,
    #[serde(rename = "06")]
    Dft,
    #[serde(rename = "08")]
    OverlappingTemplate,
    #[serde(rename = "11")]
    Serial,
    #[serde(rename = "12")]
    ApproximateEntropy,
    #[serde(rename = "13")]
    CusumForward,
    #[serde(rename = "14")]
    CusumReverse,
}

impl TestId {
    pub const ALL: [TestId; 11] = [
        TestId::Frequency,
        TestId::BlockFrequency,
        TestId::Runs,
        TestId::LongestRun,
        TestId::MatrixRank,
        TestId::Dft,
        TestId::OverlappingTemplate,
        TestId::Serial,
        TestId::ApproximateEntropy,
        TestId::CusumForward,
        TestId::CusumReverse,
    ];

    pub fn number(self) -> u8 {
        match self {
            TestId::Frequency => 1,
            TestId::BlockFrequency => 2,
            TestId::Runs => 3,
            TestId::LongestRun => 4,
            TestId::MatrixRank => 5,
            TestId::Dft => 6,
            TestId::OverlappingTemplate => 8,
            TestId::Serial => 11,
            TestId::ApproximateEntropy => 12,
            TestId::CusumForward => 13,
            TestId::CusumReverse => 14,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestId::Frequency => "frequency",
            TestId::BlockFrequency => "block_frequency",
            TestId::Runs => "runs",
            TestId::LongestRun => "longest_run",
            TestId::MatrixRank => "matrix_rank",
            TestId::Dft => "dft",
            TestId::OverlappingTemplate => "overlapping_template",
            TestId::Serial => "serial",
            TestId::ApproximateEntropy => "approximate_entropy",
            TestId::CusumForward => "cusum_forward",
            TestId::CusumReverse => "cusum_reverse",
        }
    }
}

impl fmt::Display for TestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02} {}", self.number(), self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Every p-value at or above α.
    R,
    /// Every p-value below α.
    N,
    /// Mixed sub-test outcomes.
    U,
}

impl Verdict {
    pub fn from_p_values(ps: &[f64]) -> Verdict {
        let passed = ps.iter().filter(|&&p| p >= ALPHA).count();
        if passed == ps.len() {
            Verdict::R
        } else if passed == 0 {
            Verdict::N
        } else {
            Verdict::U
        }
    }

    pub fn letter(self) -> char {
        match self {
            Verdict::R => 'R',
            Verdict::N => 'N',
            Verdict::U => 'U',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for Param {
    fn from(v: usize) -> Self {
        Param::Int(v as i64)
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Float(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_id: TestId,
    pub statistic: f64,
    pub p_values: Vec<f64>,
    pub verdict: Verdict,
    pub params: BTreeMap<String, Param>,
}

impl TestReport {
    fn new(test_id: TestId, statistic: f64, p_values: Vec<f64>, params: Vec<(&str, Param)>) -> Self {
        let p_values: Vec<f64> = p_values.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        TestReport {
            test_id,
            statistic,
            verdict: Verdict::from_p_values(&p_values),
            p_values,
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn p_value(&self) -> f64 {
        self.p_values[0]
    }
}

/// Row-major flattening of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BitStream {
    bits: Vec<u8>,
    origin: Option<SampleMeta>,
}

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Result<Self, NistError> {
        if bits.iter().any(|&b| b > 1) {
            return Err(NistError::InvalidParameter("bits must be 0 or 1".into()));
        }
        Ok(BitStream { bits, origin: None })
    }

    /// Parses a string of `0`/`1` characters; whitespace is ignored.
    pub fn from_str_bits(s: &str) -> Result<Self, NistError> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(NistError::InvalidParameter(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(BitStream { bits, origin: None })
    }

    pub fn from_array(a: &BitArray) -> Self {
        BitStream { bits: a.bits().to_vec(), origin: Some(a.meta().clone()) }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn origin(&self) -> Option<&SampleMeta> {
        self.origin.as_ref()
    }

    fn require(&self, test: TestId, min: usize) -> Result<usize, NistError> {
        let len = self.len();
        if len < min {
            Err(NistError::StreamTooShort { test, len, min })
        } else {
            Ok(len)
        }
    }

    fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// Standard normal CDF.
fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn chi_square(observed: &[u64], probs: &[f64], total: f64) -> f64 {
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| (o as f64 - total * p).powi(2) / (total * p))
        .sum()
}

pub fn frequency_monobit(s: &BitStream) -> Result<TestReport, NistError> {
    let n = s.require(TestId::Frequency, 1)?;
    let sum = 2 * s.ones() as i64 - n as i64;
    let s_obs = sum.unsigned_abs() as f64 / (n as f64).sqrt();
    let p = erfc(s_obs / std::f64::consts::SQRT_2);
    Ok(TestReport::new(TestId::Frequency, s_obs, vec![p], vec![("n", n.into())]))
}

pub fn block_frequency(s: &BitStream, block_len: usize) -> Result<TestReport, NistError> {
    if block_len == 0 {
        return Err(NistError::InvalidParameter("block length must be positive".into()));
    }
    let n = s.require(TestId::BlockFrequency, block_len)?;
    let blocks = n / block_len;
    let chi2: f64 = s.bits[..blocks * block_len]
        .chunks_exact(block_len)
        .map(|b| {
            let pi = b.iter().map(|&x| x as usize).sum::<usize>() as f64 / block_len as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * block_len as f64;
    let p = igamc(blocks as f64 / 2.0, chi2 / 2.0);
    Ok(TestReport::new(
        TestId::BlockFrequency,
        chi2,
        vec![p],
        vec![("n", n.into()), ("block_len", block_len.into()), ("blocks", blocks.into())],
    ))
}

/// Runs test. Fails the frequency prerequisite with `p = 0`.
pub fn runs(s: &BitStream) -> Result<TestReport, NistError> {
    let n = s.require(TestId::Runs, 2)?;
    let pi = s.ones() as f64 / n as f64;
    let tau = 2.0 / (n as f64).sqrt();
    let mut params = vec![("n", n.into()), ("pi", pi.into()), ("tau", tau.into())];
    if (pi - 0.5).abs() >= tau {
        params.push(("prerequisite", "frequency failed".into()));
        return Ok(TestReport::new(TestId::Runs, f64::NAN, vec![0.0], params));
    }
    let v = 1 + s.bits.windows(2).filter(|w| w[0] != w[1]).count();
    let q = pi * (1.0 - pi);
    let p = erfc((v as f64 - 2.0 * n as f64 * q).abs() / (2.0 * (2.0 * n as f64).sqrt() * q));
    Ok(TestReport::new(TestId::Runs, v as f64, vec![p], params))
}

struct LongestRunTable {
    block: usize,
    first_class: usize,
    probs: &'static [f64],
}

// Exact for 8-bit blocks; the larger tables are the standard's 4-digit values.
const LONGEST_RUN_8: LongestRunTable = LongestRunTable {
    block: 8,
    first_class: 1,
    probs: &[55.0 / 256.0, 94.0 / 256.0, 59.0 / 256.0, 48.0 / 256.0],
};
const LONGEST_RUN_128: LongestRunTable = LongestRunTable {
    block: 128,
    first_class: 4,
    probs: &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124],
};
const LONGEST_RUN_10K: LongestRunTable = LongestRunTable {
    block: 10_000,
    first_class: 10,
    probs: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
};

/// Longest run of ones per block; block size 8, 128 or 10⁴ by stream length.
pub fn longest_run_of_ones(s: &BitStream) -> Result<TestReport, NistError> {
    let n = s.require(TestId::LongestRun, 128)?;
    let table = if n < 6272 {
        LONGEST_RUN_8
    } else if n < 750_000 {
        LONGEST_RUN_128
    } else {
        LONGEST_RUN_10K
    };
    let blocks = n / table.block;
    let classes = table.probs.len();
    let mut nu = vec![0u64; classes];
    for b in s.bits[..blocks * table.block].chunks_exact(table.block) {
        let (mut run, mut best) = (0usize, 0usize);
        for &x in b {
            run = if x == 1 { run + 1 } else { 0 };
            best = best.max(run);
        }
        let class = best.clamp(table.first_class, table.first_class + classes - 1) - table.first_class;
        nu[class] += 1;
    }
    let chi2 = chi_square(&nu, table.probs, blocks as f64);
    let p = igamc((classes - 1) as f64 / 2.0, chi2 / 2.0);
    Ok(TestReport::new(
        TestId::LongestRun,
        chi2,
        vec![p],
        vec![("n", n.into()), ("block_len", table.block.into()), ("blocks", blocks.into())],
    ))
}

/// Rank over GF(2) of a `q × q` matrix whose rows are bit masks.
fn gf2_rank(rows: &mut [u64]) -> usize {
    let mut rank = 0;
    let cols = rows.len();
    for col in (0..cols).rev() {
        let bit = 1u64 << col;
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pr = rows[rank];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && *row & bit != 0 {
                *row ^= pr;
            }
        }
        rank += 1;
    }
    rank
}

/// Class probabilities for full rank, rank − 1, and lower, as tabulated
/// in the standard (rounded asymptotic values).
const RANK_PROBS: [f64; 3] = [0.2888, 0.5776, 0.1336];

pub fn binary_matrix_rank(s: &BitStream, q: usize) -> Result<TestReport, NistError> {
    if !(2..=64).contains(&q) {
        return Err(NistError::InvalidParameter(format!("matrix size must lie in 2..=64, got {q}")));
    }
    let n = s.require(TestId::MatrixRank, q * q)?;
    let count = n / (q * q);
    let mut nu = [0u64; 3];
    let mut rows = vec![0u64; q];
    for m in s.bits[..count * q * q].chunks_exact(q * q) {
        for (row, bits) in rows.iter_mut().zip(m.chunks_exact(q)) {
            *row = bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        }
        let r = gf2_rank(&mut rows);
        nu[if r == q { 0 } else if r == q - 1 { 1 } else { 2 }] += 1;
    }
    let chi2 = chi_square(&nu, &RANK_PROBS, count as f64);
    let p = (-chi2 / 2.0).exp();
    Ok(TestReport::new(
        TestId::MatrixRank,
        chi2,
        vec![p],
        vec![("n", n.into()), ("q", q.into()), ("matrices", count.into())],
    ))
}

/// Spectral test on the ±1 sequence.
pub fn dft_spectral(s: &BitStream) -> Result<TestReport, NistError> {
    let n = s.require(TestId::Dft, 2)?;
    let mut buf: Vec<Complex<f64>> =
        s.bits.iter().map(|&b| Complex::new(2.0 * b as f64 - 1.0, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nf = n as f64;
    let threshold = ((1.0f64 / 0.05).ln() * nf).sqrt();
    // Frequencies 1 ≤ k < n/2; the zero-frequency term only restates the monobit sum.
    let n1 = buf[1..n / 2].iter().filter(|z| z.norm() < threshold).count() as f64;
    drop(buf);
    let n0 = 0.95 * nf / 2.0;
    let d = (n1 - n0) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    let p = erfc(d.abs() / std::f64::consts::SQRT_2);
    Ok(TestReport::new(
        TestId::Dft,
        d,
        vec![p],
        vec![("n", n.into()), ("threshold", threshold.into()), ("below_threshold", n1.into())],
    ))
}

/// Class probabilities for the number of overlapping template hits per block.
///
/// `P(U = 0) = e^{−η}` and `P(U = u) = e^{−η} 2^{−u} Σ_{l=1}^{u} C(u−1, l−1) η^l / l!`
/// with `η = (M − m + 1) / 2^{m+1}`. The last class takes the remainder.
pub fn overlapping_probabilities(block: usize, m: usize, classes: usize) -> Vec<f64> {
    let eta = (block - m + 1) as f64 / 2f64.powi(m as i32) / 2.0;
    let mut probs: Vec<f64> = (0..classes)
        .map(|u| {
            if u == 0 {
                return (-eta).exp();
            }
            let mut sum = 0.0;
            let mut binom = 1.0; // C(u−1, l−1)
            let mut eta_pow_over_fact = 1.0;
            for l in 1..=u {
                eta_pow_over_fact *= eta / l as f64;
                sum += binom * eta_pow_over_fact;
                binom *= (u - l) as f64 / l as f64;
            }
            (-eta).exp() * sum / 2f64.powi(u as i32)
        })
        .collect();
    let rest = 1.0 - probs.iter().sum::<f64>();
    probs.push(rest);
    probs
}

pub const DEFAULT_TEMPLATE: &[u8] = &[1, 1, 1, 1, 1, 1, 1, 1, 1];
pub const DEFAULT_TEMPLATE_BLOCK: usize = 1032;
/// Hit counts `0..K` get one class each and `≥ K` shares the last.
pub const DEFAULT_TEMPLATE_CLASSES: usize = 5;

pub fn overlapping_template(s: &BitStream, template: &[u8], block: usize) -> Result<TestReport, NistError> {
    overlapping_template_with_classes(s, template, block, DEFAULT_TEMPLATE_CLASSES)
}

pub fn overlapping_template_with_classes(
    s: &BitStream,
    template: &[u8],
    block: usize,
    classes: usize,
) -> Result<TestReport, NistError> {
    let m = template.len();
    if m == 0 || m > block || template.iter().any(|&b| b > 1) || classes == 0 {
        return Err(NistError::InvalidParameter("template must be a nonempty bit pattern no longer than the block".into()));
    }
    let n = s.require(TestId::OverlappingTemplate, block)?;
    let blocks = n / block;
    let mut nu = vec![0u64; classes + 1];
    for b in s.bits[..blocks * block].chunks_exact(block) {
        let hits = b.windows(m).filter(|w| *w == template).count();
        nu[hits.min(classes)] += 1;
    }
    let probs = overlapping_probabilities(block, m, classes);
    let chi2 = chi_square(&nu, &probs, blocks as f64);
    let p = igamc(classes as f64 / 2.0, chi2 / 2.0);
    let template_str: String = template.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
    Ok(TestReport::new(
        TestId::OverlappingTemplate,
        chi2,
        vec![p],
        vec![
            ("n", n.into()),
            ("template", template_str.as_str().into()),
            ("block_len", block.into()),
            ("blocks", blocks.into()),
            ("classes", classes.into()),
        ],
    ))
}

/// Frequencies of all overlapping `m`-bit patterns with wrap-around.
fn pattern_counts(bits: &[u8], m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 1 << m];
    if m == 0 {
        return counts;
    }
    let n = bits.len();
    let mask = (1usize << m) - 1;
    let mut window = 0usize;
    for i in 0..m - 1 {
        window = (window << 1) | bits[i % n] as usize;
    }
    for i in 0..n {
        window = ((window << 1) | bits[(i + m - 1) % n] as usize) & mask;
        counts[window] += 1;
    }
    counts
}

fn psi_squared(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len() as f64;
    let sum: f64 = pattern_counts(bits, m).iter().map(|&c| (c as f64).powi(2)).sum();
    sum * 2f64.powi(m as i32) / n - n
}

pub fn serial(s: &BitStream, m: usize) -> Result<TestReport, NistError> {
    if !(2..=24).contains(&m) {
        return Err(NistError::InvalidParameter(format!("serial pattern length must lie in 2..=24, got {m}")));
    }
    let n = s.require(TestId::Serial, m)?;
    let (p0, p1, p2) = (psi_squared(&s.bits, m), psi_squared(&s.bits, m - 1), psi_squared(&s.bits, m - 2));
    let del1 = p0 - p1;
    let del2 = p0 - 2.0 * p1 + p2;
    let pv1 = igamc(2f64.powi(m as i32 - 2), del1 / 2.0);
    let pv2 = igamc(2f64.powi(m as i32 - 3), del2 / 2.0);
    Ok(TestReport::new(TestId::Serial, del1, vec![pv1, pv2], vec![("n", n.into()), ("m", m.into())]))
}

fn phi(bits: &[u8], m: usize) -> f64 {
    let n = bits.len() as f64;
    pattern_counts(bits, m)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum()
}

pub fn approximate_entropy(s: &BitStream, m: usize) -> Result<TestReport, NistError> {
    if !(1..=24).contains(&m) {
        return Err(NistError::InvalidParameter(format!("entropy block length must lie in 1..=24, got {m}")));
    }
    let n = s.require(TestId::ApproximateEntropy, m + 1)?;
    let ap_en = phi(&s.bits, m) - phi(&s.bits, m + 1);
    let chi2 = 2.0 * n as f64 * (std::f64::consts::LN_2 - ap_en);
    let p = igamc(2f64.powi(m as i32 - 1), chi2 / 2.0);
    Ok(TestReport::new(
        TestId::ApproximateEntropy,
        chi2,
        vec![p],
        vec![("n", n.into()), ("m", m.into()), ("ap_en", ap_en.into())],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
}

pub fn cumulative_sums(s: &BitStream, direction: Direction) -> Result<TestReport, NistError> {
    let id = match direction {
        Direction::Forward => TestId::CusumForward,
        Direction::Reverse => TestId::CusumReverse,
    };
    let n = s.require(id, 1)?;
    let step = |b: &u8| if *b == 1 { 1i64 } else { -1 };
    let excursion = |it: &mut dyn Iterator<Item = i64>| {
        let mut sum = 0i64;
        let mut z = 0i64;
        for x in it {
            sum += x;
            z = z.max(sum.abs());
        }
        z
    };
    let z = match direction {
        Direction::Forward => excursion(&mut s.bits.iter().map(step)),
        Direction::Reverse => excursion(&mut s.bits.iter().rev().map(step)),
    };
    let p = cusum_p_value(n, z);
    Ok(TestReport::new(
        id,
        z as f64,
        vec![p],
        vec![("n", n.into()), ("direction", format!("{direction:?}").to_lowercase().as_str().into())],
    ))
}

fn cusum_p_value(n: usize, z: i64) -> f64 {
    if z == 0 {
        return 1.0;
    }
    let (nf, zf) = (n as f64, z as f64);
    let sqrt_n = nf.sqrt();
    // Summation limits truncate toward zero, as in the reference code.
    let k_hi = ((nf / zf - 1.0) / 4.0).trunc() as i64;
    let mut sum1 = 0.0;
    for k in ((-nf / zf + 1.0) / 4.0).trunc() as i64..=k_hi {
        let k = k as f64;
        sum1 += normal_cdf((4.0 * k + 1.0) * zf / sqrt_n) - normal_cdf((4.0 * k - 1.0) * zf / sqrt_n);
    }
    let mut sum2 = 0.0;
    for k in ((-nf / zf - 3.0) / 4.0).trunc() as i64..=k_hi {
        let k = k as f64;
        sum2 += normal_cdf((4.0 * k + 3.0) * zf / sqrt_n) - normal_cdf((4.0 * k + 1.0) * zf / sqrt_n);
    }
    1.0 - sum1 + sum2
}

/// Parameters of the battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub block_len: usize,
    pub rank_q: usize,
    pub template: Vec<u8>,
    pub template_block: usize,
    pub serial_m: usize,
    pub entropy_m: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            block_len: 128,
            rank_q: 32,
            template: DEFAULT_TEMPLATE.to_vec(),
            template_block: DEFAULT_TEMPLATE_BLOCK,
            serial_m: 16,
            entropy_m: 10,
        }
    }
}

impl BatteryConfig {
    /// Recommended minimum stream length for each test.
    pub fn recommended_min_len(&self, id: TestId) -> usize {
        let log2_floor_min = |bits: usize| 1usize << bits;
        match id {
            TestId::Frequency | TestId::Runs | TestId::CusumForward | TestId::CusumReverse => 100,
            TestId::BlockFrequency => 100.max(self.block_len),
            TestId::LongestRun => 128,
            TestId::MatrixRank => 38 * self.rank_q * self.rank_q,
            TestId::Dft => 1000,
            TestId::OverlappingTemplate => 1_000_000,
            // m < ⌊log₂ L⌋ − 2
            TestId::Serial => log2_floor_min(self.serial_m + 3),
            // m < ⌊log₂ L⌋ − 5
            TestId::ApproximateEntropy => log2_floor_min(self.entropy_m + 6),
        }
    }

    pub fn run(&self, id: TestId, s: &BitStream) -> Result<TestReport, NistError> {
        match id {
            TestId::Frequency => frequency_monobit(s),
            TestId::BlockFrequency => block_frequency(s, self.block_len),
            TestId::Runs => runs(s),
            TestId::LongestRun => longest_run_of_ones(s),
            TestId::MatrixRank => binary_matrix_rank(s, self.rank_q),
            TestId::Dft => dft_spectral(s),
            TestId::OverlappingTemplate => overlapping_template(s, &self.template, self.template_block),
            TestId::Serial => serial(s, self.serial_m),
            TestId::ApproximateEntropy => approximate_entropy(s, self.entropy_m),
            TestId::CusumForward => cumulative_sums(s, Direction::Forward),
            TestId::CusumReverse => cumulative_sums(s, Direction::Reverse),
        }
    }
}

/// One battery slot: a report, or the reason the test did not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatteryEntry {
    Ran(TestReport),
    Skipped { test_id: TestId, skipped: String },
}

impl BatteryEntry {
    pub fn test_id(&self) -> TestId {
        match self {
            BatteryEntry::Ran(r) => r.test_id,
            BatteryEntry::Skipped { test_id, .. } => *test_id,
        }
    }

    pub fn report(&self) -> Option<&TestReport> {
        match self {
            BatteryEntry::Ran(r) => Some(r),
            BatteryEntry::Skipped { .. } => None,
        }
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.report().map(|r| r.verdict)
    }
}

pub fn run_battery(a: &BitArray) -> Vec<BatteryEntry> {
    run_battery_with(&BitStream::from_array(a), &BatteryConfig::default())
}

/// Runs every test in battery order. Tests run in parallel.
pub fn run_battery_with(s: &BitStream, config: &BatteryConfig) -> Vec<BatteryEntry> {
    TestId::ALL
        .par_iter()
        .map(|&id| {
            let min = config.recommended_min_len(id);
            if s.len() < min {
                return BatteryEntry::Skipped {
                    test_id: id,
                    skipped: NistError::StreamTooShort { test: id, len: s.len(), min }.to_string(),
                };
            }
            match config.run(id, s) {
                Ok(r) => BatteryEntry::Ran(r),
                Err(e) => BatteryEntry::Skipped { test_id: id, skipped: e.to_string() },
            }
        })
        .collect()
}

/// Two-line grid: test numbers, then verdict letters (`-` for skipped).
pub fn verdict_grid(entries: &[BatteryEntry]) -> String {
    let header: Vec<String> = entries.iter().map(|e| format!("{:02}", e.test_id().number())).collect();
    let letters: Vec<String> = entries
        .iter()
        .map(|e| format!(" {}", e.verdict().map_or('-', Verdict::letter)))
        .collect();
    format!("{}\n{}\n", header.join(" "), letters.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_classical;

    fn stream(s: &str) -> BitStream {
        BitStream::from_str_bits(s).unwrap()
    }

    fn close(got: f64, want: f64) {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    const LONGEST_RUN_EXAMPLE: &str = "11001100000101010110110001001100111000000000001001001101010100010001001111010110100000001101011111001100111001101101100010110010";

    #[test]
    fn worked_examples() {
        close(frequency_monobit(&stream("1011010101")).unwrap().p_value(), 0.527089);
        close(block_frequency(&stream("0110011010"), 3).unwrap().p_value(), 0.801252);
        close(runs(&stream("1001101011")).unwrap().p_value(), 0.147232);
        close(longest_run_of_ones(&stream(LONGEST_RUN_EXAMPLE)).unwrap().p_value(), 0.180609);
        close(binary_matrix_rank(&stream("01011001001010101101"), 3).unwrap().p_value(), 0.741948);
        close(dft_spectral(&stream("1001010011")).unwrap().p_value(), 0.029523);
        let ser = serial(&stream("0011011101"), 3).unwrap();
        close(ser.p_values[0], 0.808792);
        close(ser.p_values[1], 0.670320);
        close(approximate_entropy(&stream("0100110101"), 3).unwrap().p_value(), 0.261961);
        close(cumulative_sums(&stream("1011010111"), Direction::Forward).unwrap().p_value(), 0.411658);
    }

    #[test]
    fn overlapping_template_small_example() {
        let s = stream("10111011110010110100011100101110111110000101101001");
        let probs = overlapping_probabilities(10, 2, 2);
        close(probs[0], 0.324652);
        let r = overlapping_template_with_classes(&s, &[1, 1], 10, 2).unwrap();
        // Hit counts per block are 5, 1, 3, 4, 1, so ν = (0, 2, 3).
        let nu = [0.0, 2.0, 3.0];
        let chi2: f64 = nu.iter().zip(&probs).map(|(v, p)| (v - 5.0 * p).powi(2) / (5.0 * p)).sum();
        close(r.statistic, chi2);
        close(r.p_value(), (-chi2 / 2.0).exp());
    }

    #[test]
    fn overlapping_probabilities_default_template() {
        let p = overlapping_probabilities(1032, 9, 5);
        let want = [0.367879, 0.183940, 0.137955, 0.099634, 0.069935, 0.140657];
        for (g, w) in p.iter().zip(want) {
            assert!((g - w).abs() < 1e-5, "{g} vs {w}");
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gf2_rank_basics() {
        assert_eq!(gf2_rank(&mut [0b100, 0b010, 0b001]), 3);
        assert_eq!(gf2_rank(&mut [0b110, 0b011, 0b101]), 2);
        assert_eq!(gf2_rank(&mut [0, 0, 0]), 0);
        assert_eq!(gf2_rank(&mut [0b111, 0b111, 0b000]), 1);
    }

    #[test]
    fn verdict_model() {
        assert_eq!(Verdict::from_p_values(&[0.5, 0.02]), Verdict::R);
        assert_eq!(Verdict::from_p_values(&[0.001, 0.0]), Verdict::N);
        assert_eq!(Verdict::from_p_values(&[0.5, 0.001]), Verdict::U);
        assert_eq!(Verdict::from_p_values(&[0.01]), Verdict::R);
    }

    #[test]
    fn degenerate_streams() {
        let ones = BitStream::new(vec![1; 10_000]).unwrap();
        let zeros = BitStream::new(vec![0; 10_000]).unwrap();
        assert_eq!(frequency_monobit(&ones).unwrap().verdict, Verdict::N);
        assert_eq!(block_frequency(&ones, 128).unwrap().verdict, Verdict::N);
        let r = runs(&ones).unwrap();
        assert_eq!((r.p_value(), r.verdict), (0.0, Verdict::N));
        assert!(r.params.contains_key("prerequisite"));
        let lr = longest_run_of_ones(&BitStream::new(vec![0; 128]).unwrap()).unwrap();
        assert!(lr.p_value() < 0.01);
        let rank = binary_matrix_rank(&BitStream::new(vec![0; 38 * 1024]).unwrap(), 32).unwrap();
        assert_eq!(rank.verdict, Verdict::N);
        assert_eq!(overlapping_template(&BitStream::new(vec![1; 10_320]).unwrap(), DEFAULT_TEMPLATE, 1032).unwrap().verdict, Verdict::N);
        assert_eq!(serial(&zeros, 5).unwrap().verdict, Verdict::N);
        assert_eq!(approximate_entropy(&zeros, 3).unwrap().verdict, Verdict::N);
        assert_eq!(cumulative_sums(&ones, Direction::Forward).unwrap().verdict, Verdict::N);
        assert_eq!(cumulative_sums(&zeros, Direction::Reverse).unwrap().verdict, Verdict::N);
    }

    #[test]
    fn alternating_stream() {
        let alt = BitStream::new((0..1_000_000).map(|i| (i % 2) as u8).collect()).unwrap();
        assert!(frequency_monobit(&alt).unwrap().p_value() > 0.999);
        assert!(cumulative_sums(&alt, Direction::Forward).unwrap().p_value() > 0.999);
        let short = BitStream::new((0..10_000).map(|i| (i % 2) as u8).collect()).unwrap();
        assert_eq!(dft_spectral(&short).unwrap().verdict, Verdict::N);
    }

    #[test]
    fn errors_on_short_or_bad_input() {
        let s = stream("0101");
        assert!(matches!(block_frequency(&s, 8), Err(NistError::StreamTooShort { .. })));
        assert!(longest_run_of_ones(&s).is_err());
        assert!(binary_matrix_rank(&s, 1).is_err());
        assert!(serial(&s, 1).is_err());
        assert!(frequency_monobit(&BitStream::new(vec![]).unwrap()).is_err());
        assert!(BitStream::new(vec![2]).is_err());
        assert!(BitStream::from_str_bits("01x").is_err());
    }

    #[test]
    fn uniform_million_bits_mostly_pass() {
        // Eleven tests at α = 0.01 on a fixed seed: one rejection is within noise.
        let a = generate_classical(100, 10_000, 31, 0.5).unwrap();
        let entries = run_battery(&a);
        assert_eq!(entries.len(), 11);
        let mut rejected = 0;
        for e in &entries {
            let r = e.report().unwrap_or_else(|| panic!("{:?} skipped", e.test_id()));
            assert!(r.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
            rejected += (r.verdict != Verdict::R) as usize;
        }
        assert!(rejected <= 1, "{entries:?}");
    }

    #[test]
    fn frequency_p_value_monotone_in_bias() {
        let ps: Vec<f64> = [0.5, 0.49, 0.486, 0.45]
            .iter()
            .map(|&p1| frequency_monobit(&BitStream::from_array(&generate_classical(12, 100_000, 6, p1).unwrap())).unwrap().p_value())
            .collect();
        assert!(ps.windows(2).all(|w| w[1] <= w[0]), "{ps:?}");
        assert!(ps[2] < 1e-10);
    }

    #[test]
    fn battery_skips_short_streams() {
        let a = generate_classical(10, 20, 0, 0.5).unwrap();
        let entries = run_battery(&a);
        assert!(entries[0].report().is_some());
        assert!(matches!(entries[4], BatteryEntry::Skipped { test_id: TestId::MatrixRank, .. }));
        let grid = verdict_grid(&entries);
        assert!(grid.starts_with("01 02 03 04 05 06 08 11 12 13 14\n"));
        assert!(grid.contains('-'));
    }

    #[test]
    fn battery_is_deterministic_and_serializable() {
        let a = generate_classical(12, 2000, 4, 0.5).unwrap();
        let s = BitStream::from_array(&a);
        let cfg = BatteryConfig { serial_m: 5, entropy_m: 4, ..Default::default() };
        let x = run_battery_with(&s, &cfg);
        assert_eq!(x, run_battery_with(&s, &cfg));
        let json = serde_json::to_string(&x).unwrap();
        assert!(json.contains("\"test_id\":\"01\""));
        assert!(json.contains("\"verdict\":\"R\"") || json.contains("\"verdict\":\"N\""));
    }
}
