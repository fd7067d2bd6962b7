//! Random-matrix views of a bit array.
//!
//! Consecutive rows are cut into `n × n` square matrices (a real Ginibre-like
//! ensemble with entries in `{0, 1}`) or into `p × n` rectangular blocks whose
//! Gram matrices `W = XᵀX / p` form a Wishart ensemble. Leftover rows at the
//! end of the array are discarded.
//!
//! Bernoulli(1/2) entries have mean 1/2, so `X = (Z + J)/2` with `Z` a
//! centered ±1 matrix and `J` all ones. The bulk of `X/√n` fills a disk of
//! radius 1/2 and the rank-one part `J/(2√n)` produces one real outlier near
//! `√n/2`. For the Wishart blocks the bulk follows Marchenko–Pastur with
//! `σ² = 1/4` and the `J` term gives one outlier near `n/4`.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::BitArray;
use crate::haar::Complex64;

/// Relative margin beyond the disk radius that marks a complex outlier.
pub const DISK_MARGIN: f64 = 0.2;
/// Absolute tolerance around the Marchenko–Pastur support for the bulk.
pub const MP_TOLERANCE: f64 = 0.05;
/// Variance of the centered entries `Z/2`.
pub const BERNOULLI_HALF_VARIANCE: f64 = 0.25;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("need at least {needed} rows, the sample has {rows}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("eigensolver did not converge on matrix {0}")]
    EigenFailure(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Non-overlapping `n × n` row blocks of a sample.
#[derive(Debug, Clone, Copy)]
pub struct SquareEnsemble<'a> {
    source: &'a BitArray,
    count: usize,
}

impl<'a> SquareEnsemble<'a> {
    pub fn n(&self) -> usize {
        self.source.n_qubits()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn discarded_rows(&self) -> usize {
        self.source.rows() - self.count * self.n()
    }

    /// Bits of matrix `k`, row-major.
    pub fn bits(&self, k: usize) -> &'a [u8] {
        let n = self.n();
        &self.source.bits()[k * n * n..(k + 1) * n * n]
    }

    pub fn matrix(&self, k: usize) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_row_iterator(n, n, self.bits(k).iter().map(|&b| b as f64))
    }
}

pub fn slice_square(a: &BitArray) -> Result<SquareEnsemble<'_>, EnsembleError> {
    let n = a.n_qubits();
    if a.rows() < n {
        return Err(EnsembleError::TooFewRows { rows: a.rows(), needed: n });
    }
    Ok(SquareEnsemble { source: a, count: a.rows() / n })
}

/// Average square matrix and per-qubit one-fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub n: usize,
    /// Entrywise mean over the square ensemble.
    pub mean_matrix: DMatrix<f64>,
    /// Fraction of ones in each column over all rows.
    pub column_means: Vec<f64>,
    /// Overall fraction of ones.
    pub p1: f64,
}

impl HeatMap {
    /// `n` lines of `n` comma-separated entries.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.mean_matrix[(i, j)].to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()
    }
}

/// Heat map of the square ensemble. Each entry is the mean over the
/// `⌊M/n⌋` matrices, which is `(n/M)·Σ X_k` when `n` divides `M`.
pub fn heatmap(a: &BitArray) -> Result<HeatMap, EnsembleError> {
    let e = slice_square(a)?;
    let n = e.n();
    let mut sums = vec![0u64; n * n];
    for k in 0..e.len() {
        for (s, &b) in sums.iter_mut().zip(e.bits(k)) {
            *s += b as u64;
        }
    }
    let count = e.len() as f64;
    let rows = a.rows() as f64;
    Ok(HeatMap {
        n,
        mean_matrix: DMatrix::from_row_iterator(n, n, sums.iter().map(|&s| s as f64 / count)),
        column_means: a.column_ones().iter().map(|&c| c as f64 / rows).collect(),
        p1: a.one_fraction(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnBias {
    pub qubit: usize,
    pub one_fraction: f64,
    pub flagged: bool,
}

/// Per-qubit stripe detector.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub p1: f64,
    /// Flag threshold `4·√(p1(1−p1)/M)` on `|mean_j − p1|`.
    pub threshold: f64,
    pub columns: Vec<ColumnBias>,
}

impl BiasReport {
    pub fn flagged(&self) -> impl Iterator<Item = &ColumnBias> {
        self.columns.iter().filter(|c| c.flagged)
    }
}

pub fn column_bias_report(a: &BitArray) -> BiasReport {
    let rows = a.rows() as f64;
    let p1 = a.one_fraction();
    let threshold = 4.0 * (p1 * (1.0 - p1) / rows).sqrt();
    let columns = a
        .column_ones()
        .into_iter()
        .enumerate()
        .map(|(qubit, c)| {
            let one_fraction = c as f64 / rows;
            ColumnBias { qubit, one_fraction, flagged: (one_fraction - p1).abs() > threshold }
        })
        .collect();
    BiasReport { p1, threshold, columns }
}

/// `Z = 2X − J`.
pub fn mean_shift(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.map(|v| 2.0 * v - 1.0)
}

/// Inverse of [`mean_shift`]: `X = (Z + J)/2`.
pub fn mean_unshift(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| (v + 1.0) / 2.0)
}

/// Eigenvalues of a real square matrix via real Schur form.
pub fn real_matrix_eigenvalues(m: DMatrix<f64>) -> Option<Vec<Complex64>> {
    let schur = Schur::try_new(m, f64::EPSILON, 10_000)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of scaled square matrices, partitioned by the disk radius.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    /// Matrix size; eigenvalues are grouped `n` per matrix in ensemble order.
    pub n: usize,
    pub eigenvalues: Vec<Complex64>,
    pub disk_radius: f64,
    pub margin: f64,
    pub is_outlier: Vec<bool>,
}

impl ComplexSpectrum {
    pub fn matrix_count(&self) -> usize {
        self.eigenvalues.len() / self.n
    }

    pub fn per_matrix(&self) -> impl Iterator<Item = &[Complex64]> {
        self.eigenvalues.chunks_exact(self.n)
    }

    pub fn outliers(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.eigenvalues
            .iter()
            .zip(&self.is_outlier)
            .filter(|(_, &o)| o)
            .map(|(z, _)| *z)
    }

    pub fn bulk(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.eigenvalues
            .iter()
            .zip(&self.is_outlier)
            .filter(|(_, &o)| !o)
            .map(|(z, _)| *z)
    }

    /// CSV `re,im,is_outlier`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "re,im,is_outlier")?;
        for (z, &o) in self.eigenvalues.iter().zip(&self.is_outlier) {
            writeln!(out, "{},{},{}", z.re, z.im, o as u8)?;
        }
        out.flush()
    }
}

/// Spectra of the first `count` matrices, scaled by `1/√n`.
///
/// Unshifted mode uses `X_k/√n`. Shifted mode uses `Z_k/(2√n)`, which has
/// the same half-radius bulk as the unshifted mode but no mean outlier.
/// Either way the disk radius is 1/2, and eigenvalues beyond
/// `radius·(1 + DISK_MARGIN)` are outliers.
pub fn ginibre_spectrum(e: &SquareEnsemble<'_>, count: usize, shifted: bool) -> Result<ComplexSpectrum, EnsembleError> {
    let n = e.n();
    if n < 2 {
        return Err(EnsembleError::InvalidParameter("matrices must be at least 2×2".into()));
    }
    if count > e.len() {
        return Err(EnsembleError::InvalidParameter(format!(
            "asked for {count} matrices, the ensemble has {}",
            e.len()
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let per_matrix: Vec<Vec<Complex64>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let x = e.matrix(k);
            let m = if shifted { mean_shift(&x) * (0.5 * scale) } else { x * scale };
            real_matrix_eigenvalues(m).ok_or(EnsembleError::EigenFailure(k))
        })
        .collect::<Result<_, _>>()?;
    let eigenvalues = per_matrix.concat();
    let disk_radius = 0.5;
    let cut = disk_radius * (1.0 + DISK_MARGIN);
    let is_outlier = eigenvalues.iter().map(|z| z.norm() > cut).collect();
    Ok(ComplexSpectrum { n, eigenvalues, disk_radius, margin: DISK_MARGIN, is_outlier })
}

/// Support `(λ₋, λ₊) = σ²(1 ∓ √γ)²` of the Marchenko–Pastur law.
pub fn mp_bounds(gamma: f64, sigma2: f64) -> (f64, f64) {
    assert!(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1], got {gamma}");
    assert!(sigma2 > 0.0, "sigma2 must be positive, got {sigma2}");
    let r = gamma.sqrt();
    (sigma2 * (1.0 - r).powi(2), sigma2 * (1.0 + r).powi(2))
}

/// Marchenko–Pastur density; zero outside the support.
pub fn mp_density(lambda: f64, gamma: f64, sigma2: f64) -> f64 {
    let (lo, hi) = mp_bounds(gamma, sigma2);
    if lambda <= lo || lambda >= hi {
        return 0.0;
    }
    ((hi - lambda) * (lambda - lo)).sqrt() / (2.0 * PI * gamma * sigma2 * lambda)
}

/// Marchenko–Pastur probability mass of `[a, b]`.
///
/// Integrates in `θ` with `λ = λ₋ + (λ₊ − λ₋)(1 − cos θ)/2`, which removes
/// the square-root endpoint behavior and leaves a smooth integrand.
pub fn mp_mass(a: f64, b: f64, gamma: f64, sigma2: f64) -> f64 {
    let (lo, hi) = mp_bounds(gamma, sigma2);
    let (a, b) = (a.max(lo), b.min(hi));
    if b <= a {
        return 0.0;
    }
    let half = (hi - lo) / 2.0;
    let theta = |l: f64| (1.0 - (l - lo) / half).clamp(-1.0, 1.0).acos();
    let integrand = |t: f64| {
        let s = t.sin();
        let l = lo + half * (1.0 - t.cos());
        if l <= 0.0 {
            // γ = 1: sin²θ / λ → 2/half as θ → 0
            return half * 2.0 / (2.0 * PI * gamma * sigma2);
        }
        half * half * s * s / (2.0 * PI * gamma * sigma2 * l)
    };
    let (t0, t1) = (theta(a), theta(b));
    let steps = 2000;
    let h = (t1 - t0) / steps as f64;
    let mut sum = integrand(t0) + integrand(t1);
    for i in 1..steps {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * integrand(t0 + i as f64 * h);
    }
    sum * h / 3.0
}

/// `points` samples of the density across the support, as `(λ, ρ)`.
pub fn mp_curve(gamma: f64, sigma2: f64, points: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = mp_bounds(gamma, sigma2);
    (0..points)
        .map(|i| {
            let l = lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64;
            (l, mp_density(l, gamma, sigma2))
        })
        .collect()
}

/// CSV `lambda,rho`.
pub fn write_mp_curve_csv<W: Write>(curve: &[(f64, f64)], mut out: W) -> io::Result<()> {
    writeln!(out, "lambda,rho")?;
    for (l, r) in curve {
        writeln!(out, "{l},{r}")?;
    }
    out.flush()
}

/// Eigenvalues of the Wishart blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSpectrum {
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// Parallel to `eigenvalues`.
    pub is_outlier: Vec<bool>,
    pub gamma: f64,
    pub sigma2: f64,
    pub bounds: (f64, f64),
    pub tolerance: f64,
    /// Rows per block, `p = round(n/γ)`.
    pub block_rows: usize,
    /// Largest eigenvalue of each block, in block order.
    pub block_maxima: Vec<f64>,
    /// Location of the mean-induced outlier, `n·σ²`.
    pub expected_outlier: f64,
}

impl RealSpectrum {
    pub fn bulk(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().zip(&self.is_outlier).filter(|(_, &o)| !o).map(|(l, _)| *l)
    }

    pub fn outliers(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().zip(&self.is_outlier).filter(|(_, &o)| o).map(|(l, _)| *l)
    }

    /// Mean of the per-block largest eigenvalue.
    pub fn mean_block_maximum(&self) -> f64 {
        self.block_maxima.iter().sum::<f64>() / self.block_maxima.len() as f64
    }

    /// L1 distance between the bulk histogram (`bins` uniform bins over
    /// `[λ₋ − tol, λ₊ + tol]`, normalized by the bulk count) and the
    /// Marchenko–Pastur mass of each bin.
    pub fn bulk_l1_error(&self, bins: usize) -> f64 {
        let (lo, hi) = (self.bounds.0 - self.tolerance, self.bounds.1 + self.tolerance);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        let mut total = 0u64;
        for l in self.bulk() {
            counts[(((l - lo) / width) as usize).min(bins - 1)] += 1;
            total += 1;
        }
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let a = lo + i as f64 * width;
                let expected = mp_mass(a, a + width, self.gamma, self.sigma2);
                (c as f64 / total as f64 - expected).abs()
            })
            .sum()
    }

    /// CSV `lambda,is_outlier`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "lambda,is_outlier")?;
        for (l, &o) in self.eigenvalues.iter().zip(&self.is_outlier) {
            writeln!(out, "{l},{}", o as u8)?;
        }
        out.flush()
    }
}

/// Rows per Wishart block for rectangular ratio `γ = n/p`.
pub fn block_rows(n: usize, gamma: f64) -> usize {
    (n as f64 / gamma).round() as usize
}

/// Spectra of `W = XᵀX/p` over consecutive `p × n` blocks.
pub fn wishart_spectrum(a: &BitArray, gamma: f64) -> Result<RealSpectrum, EnsembleError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(EnsembleError::InvalidParameter(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let n = a.n_qubits();
    let p = block_rows(n, gamma);
    if a.rows() < p {
        return Err(EnsembleError::TooFewRows { rows: a.rows(), needed: p });
    }
    let blocks = a.rows() / p;
    let bits = a.bits();
    let per_block: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|k| {
            let block = &bits[k * p * n..(k + 1) * p * n];
            let x = DMatrix::from_row_iterator(p, n, block.iter().map(|&b| b as f64));
            let w = x.tr_mul(&x) / p as f64;
            let eig = SymmetricEigen::try_new(w, f64::EPSILON, 10_000).ok_or(EnsembleError::EigenFailure(k))?;
            Ok(eig.eigenvalues.iter().copied().collect())
        })
        .collect::<Result<_, _>>()?;

    let block_maxima = per_block
        .iter()
        .map(|e| e.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut eigenvalues = per_block.concat();
    eigenvalues.sort_by(f64::total_cmp);

    let sigma2 = BERNOULLI_HALF_VARIANCE;
    let bounds = mp_bounds(gamma, sigma2);
    let is_outlier = eigenvalues
        .iter()
        .map(|&l| l < bounds.0 - MP_TOLERANCE || l > bounds.1 + MP_TOLERANCE)
        .collect();
    Ok(RealSpectrum {
        eigenvalues,
        is_outlier,
        gamma,
        sigma2,
        bounds,
        tolerance: MP_TOLERANCE,
        block_rows: p,
        block_maxima,
        expected_outlier: n as f64 * sigma2,
    })
}
