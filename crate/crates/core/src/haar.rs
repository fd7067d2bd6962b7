//! Haar-random (CUE) unitaries and the statistics of their output states.
//!
//! A unitary is drawn by factoring a matrix of i.i.d. standard complex
//! Gaussians `A = QR` and setting `U = QΛ` with `Λ = diag(r_kk / |r_kk|)`.
//! Without the phase correction the distribution of `Q` depends on the QR
//! convention and is not Haar.
//!
//! The output state `U|0ⁿ⟩` is the first column of `U`. Because the Gaussian
//! matrix is filled column-major, that column equals `a₁ / ‖a₁‖` for the first
//! `N` Gaussians of the stream, which lets shot sampling skip the `O(N³)`
//! factorization while producing exactly the state the full unitary would.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{Complex, DMatrix, Schur};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{self, BitArray, DatasetError, OutcomeHistogram, SampleMeta, Source};
use crate::rng::{child_seed, stream_rng};

pub type Complex64 = Complex<f64>;

/// Largest qubit count the sampler accepts (`N = 4096`).
pub const MAX_SAMPLER_QUBITS: usize = 12;

/// Linear XEB fidelity reported for the 53-qubit hardware experiment. Its
/// `p(x)` values come from a supercomputer simulation and cannot be recomputed here.
pub const GOOGLE_N53_XEB_FIDELITY: f64 = 0.00224;

const UNITARITY_TOL: f64 = 1e-8;
const SHOT_BLOCK: usize = 4096;

#[derive(Debug, Error)]
pub enum HaarError {
    #[error("{n} qubits exceed the sampler limit of {max}")]
    DimensionTooLarge { n: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("u = {u} lies outside the density's domain [0, {upper}]")]
    DomainError { u: f64, upper: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not unitary: eigenvalue modulus deviates from 1 by {deviation:e}")]
    NonUnitary { deviation: f64 },
    #[error("Schur decomposition did not converge")]
    EigenFailure,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// A unitary together with its output state on `|0ⁿ⟩`.
#[derive(Debug, Clone)]
pub struct UnitarySample {
    pub n_qubits: usize,
    pub unitary: DMatrix<Complex64>,
    /// `c_x = ⟨x|U|0ⁿ⟩`.
    pub amplitudes: Vec<Complex64>,
    /// `p_x = |c_x|²`.
    pub probs: Vec<f64>,
}

impl UnitarySample {
    /// Wrap an arbitrary `2ⁿ × 2ⁿ` matrix; unitarity is not checked here.
    pub fn from_unitary(n_qubits: usize, unitary: DMatrix<Complex64>) -> Result<Self, HaarError> {
        let dim = 1usize << n_qubits;
        if unitary.nrows() != dim || unitary.ncols() != dim {
            return Err(HaarError::ShapeMismatch(format!(
                "{}×{} matrix for {n_qubits} qubits",
                unitary.nrows(),
                unitary.ncols()
            )));
        }
        let amplitudes: Vec<Complex64> = unitary.column(0).iter().copied().collect();
        let probs = amplitudes.iter().map(|c| c.norm_sqr()).collect();
        Ok(UnitarySample { n_qubits, unitary, amplitudes, probs })
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// `max |U†U − I|` entrywise.
    pub fn unitarity_error(&self) -> f64 {
        let gram = self.unitary.adjoint() * &self.unitary;
        let mut worst = 0.0f64;
        for j in 0..gram.ncols() {
            for i in 0..gram.nrows() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Output state of a CUE unitary without the unitary itself.
#[derive(Debug, Clone)]
pub struct CueState {
    pub n_qubits: usize,
    pub amplitudes: Vec<Complex64>,
    pub probs: Vec<f64>,
}

/// How shots relate to unitaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ShotMode {
    /// A new Haar unitary for every shot: the true ensemble average.
    FreshUnitaryPerShot,
    /// One unitary for all shots, as in the hardware experiment.
    FixedUnitary,
}

fn check_sampler_width(n: usize) -> Result<(), HaarError> {
    if n == 0 {
        return Err(HaarError::InvalidParameter("need at least one qubit".into()));
    }
    if n > MAX_SAMPLER_QUBITS {
        return Err(HaarError::DimensionTooLarge { n, max: MAX_SAMPLER_QUBITS });
    }
    Ok(())
}

fn standard_complex_gaussian(rng: &mut ChaCha20Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar unitary of dimension `dim` from `rng`.
pub fn haar_unitary(dim: usize, rng: &mut ChaCha20Rng) -> DMatrix<Complex64> {
    // column-major fill: the first `dim` draws form the first column
    let data: Vec<Complex64> = (0..dim * dim).map(|_| standard_complex_gaussian(rng)).collect();
    let qr = DMatrix::from_vec(dim, dim, data).qr();
    let r_diag: Vec<Complex64> = qr.r().diagonal().iter().copied().collect();
    correct_phases(qr.q(), &r_diag)
}

/// `Q · diag(r_kk / |r_kk|)`: the unique factor with a positive real `R`
/// diagonal, whatever sign convention the QR routine used.
pub fn correct_phases(mut q: DMatrix<Complex64>, r_diag: &[Complex64]) -> DMatrix<Complex64> {
    for (k, r) in r_diag.iter().enumerate() {
        let norm = r.norm();
        let phase = if norm > 0.0 { r / norm } else { Complex64::new(1.0, 0.0) };
        for v in q.column_mut(k).iter_mut() {
            *v *= phase;
        }
    }
    q
}

/// One CUE unitary on `n` qubits; stream 0 of `seed`.
pub fn sample_cue_unitary(n: usize, seed: u64) -> Result<UnitarySample, HaarError> {
    check_sampler_width(n)?;
    let mut rng = stream_rng(seed, 0);
    UnitarySample::from_unitary(n, haar_unitary(1 << n, &mut rng))
}

/// `count` independent CUE unitaries; sample `i` uses stream `i` of `seed`, so
/// element 0 equals [`sample_cue_unitary`]`(n, seed)`.
pub fn sample_cue_unitaries(n: usize, count: usize, seed: u64) -> Result<Vec<UnitarySample>, HaarError> {
    check_sampler_width(n)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            UnitarySample::from_unitary(n, haar_unitary(1 << n, &mut rng))
        })
        .collect()
}

fn state_from_rng(n: usize, rng: &mut ChaCha20Rng) -> CueState {
    let dim = 1usize << n;
    let column: Vec<Complex64> = (0..dim).map(|_| standard_complex_gaussian(rng)).collect();
    let norm = column.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let amplitudes: Vec<Complex64> = column.into_iter().map(|c| c / norm).collect();
    let probs = amplitudes.iter().map(|c| c.norm_sqr()).collect();
    CueState { n_qubits: n, amplitudes, probs }
}

/// The output state of the unitary [`sample_cue_unitary`]`(n, seed)` would
/// return, computed in `O(N)`.
pub fn sample_cue_state(n: usize, seed: u64) -> Result<CueState, HaarError> {
    check_sampler_width(n)?;
    Ok(state_from_rng(n, &mut stream_rng(seed, 0)))
}

/// Inverse-CDF sampler over outcome probabilities.
#[derive(Debug, Clone)]
pub struct OutcomeSampler {
    cdf: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        OutcomeSampler { cdf }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let total = *self.cdf.last().expect("non-empty distribution");
        let target = rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= target);
        idx.min(self.cdf.len() - 1) as u64
    }
}

fn push_outcome(x: u64, n: usize, out: &mut Vec<u8>) {
    out.extend((0..n).map(|i| ((x >> (n - 1 - i)) & 1) as u8));
}

/// `rows` shots from the fixed distribution `probs` over `n`-bit outcomes.
/// Shots are drawn in blocks with one generator stream per block.
pub fn sample_shots(probs: &[f64], n: usize, rows: usize, seed: u64) -> Result<Vec<u8>, HaarError> {
    if probs.len() != 1usize << n {
        return Err(HaarError::ShapeMismatch(format!(
            "{} probabilities for {n} qubits",
            probs.len()
        )));
    }
    let sampler = OutcomeSampler::new(probs);
    let blocks: Vec<Vec<u8>> = (0..rows.div_ceil(SHOT_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let len = SHOT_BLOCK.min(rows - b * SHOT_BLOCK);
            let mut bits = Vec::with_capacity(len * n);
            for _ in 0..len {
                push_outcome(sampler.sample(&mut rng), n, &mut bits);
            }
            bits
        })
        .collect();
    Ok(blocks.concat())
}

/// Measure `rows` bit-strings from CUE output states.
///
/// With [`ShotMode::FixedUnitary`] the state is the one of
/// [`sample_cue_unitary`]`(n, seed)`; with [`ShotMode::FreshUnitaryPerShot`]
/// shot `i` measures the output state of a unitary drawn from stream `i`.
pub fn sample_cue_bitstrings(n: usize, rows: usize, seed: u64, mode: ShotMode) -> Result<BitArray, HaarError> {
    check_sampler_width(n)?;
    if rows == 0 {
        return Err(HaarError::InvalidParameter("need at least one shot".into()));
    }
    let shot_seed = child_seed(seed, 1);
    let bits = match mode {
        ShotMode::FixedUnitary => {
            let state = sample_cue_state(n, seed)?;
            sample_shots(&state.probs, n, rows, shot_seed)?
        }
        ShotMode::FreshUnitaryPerShot => {
            let shots: Vec<u64> = (0..rows)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream_rng(seed, i as u64);
                    let state = state_from_rng(n, &mut rng);
                    OutcomeSampler::new(&state.probs).sample(&mut rng)
                })
                .collect();
            let mut bits = Vec::with_capacity(rows * n);
            for x in shots {
                push_outcome(x, n, &mut bits);
            }
            bits
        }
    };
    let tag = match mode {
        ShotMode::FixedUnitary => "fixed",
        ShotMode::FreshUnitaryPerShot => "fresh",
    };
    let meta = SampleMeta::generated(Source::CueSampler, n, seed, format!("cue_{tag}_n{n}_M{rows}_s{seed}"));
    Ok(BitArray::new(meta, bits)?)
}

/// Hilbert-space dimension for the eigenvector density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CueDim {
    Finite(u64),
    /// `N → ∞`: the density of `u = Np` becomes `e^{-u}`.
    Asymptotic,
}

/// Density of the scaled overlap `u = N·p` under the CUE eigenvector
/// distribution `P(p) = (N−1)(1−p)^{N−2}`, i.e. `P(u/N)/N`.
pub fn cue_eigvec_density(u: f64, dim: CueDim) -> Result<f64, HaarError> {
    match dim {
        CueDim::Finite(n) => {
            if n < 2 {
                return Err(HaarError::InvalidParameter(format!("dimension {n} < 2")));
            }
            let nf = n as f64;
            if !(0.0..=nf).contains(&u) {
                return Err(HaarError::DomainError { u, upper: nf });
            }
            Ok((nf - 1.0) / nf * (1.0 - u / nf).powf(nf - 2.0))
        }
        CueDim::Asymptotic => {
            if !(u >= 0.0) {
                return Err(HaarError::DomainError { u, upper: f64::INFINITY });
            }
            Ok((-u).exp())
        }
    }
}

/// CDF matching [`cue_eigvec_density`], clamped outside the domain.
pub fn cue_eigvec_cdf(u: f64, dim: CueDim) -> f64 {
    match dim {
        CueDim::Finite(n) => {
            let nf = n as f64;
            let u = u.clamp(0.0, nf);
            1.0 - (1.0 - u / nf).powf(nf - 1.0)
        }
        CueDim::Asymptotic => 1.0 - (-u.max(0.0)).exp(),
    }
}

/// `points` samples `(u, density)` of [`cue_eigvec_density`] over `[0, upper]`.
pub fn cue_eigvec_curve(dim: CueDim, upper: f64, points: usize) -> Result<Vec<(f64, f64)>, HaarError> {
    if points < 2 || !(upper > 0.0) {
        return Err(HaarError::InvalidParameter("curve needs ≥ 2 points over a positive range".into()));
    }
    let upper = match dim {
        CueDim::Finite(n) => upper.min(n as f64),
        CueDim::Asymptotic => upper,
    };
    (0..points)
        .map(|i| {
            let u = upper * i as f64 / (points - 1) as f64;
            Ok((u, cue_eigvec_density(u, dim)?))
        })
        .collect()
}

/// CSV `u,density` for an analytic curve.
pub fn write_curve_csv<W: Write>(curve: &[(f64, f64)], mut out: W) -> io::Result<()> {
    writeln!(out, "u,density")?;
    for (u, d) in curve {
        writeln!(out, "{u},{d}")?;
    }
    out.flush()
}

/// Normalized histogram of the scaled probabilities `u_x = N·p_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDensity {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    /// Number of values histogrammed (`N`).
    pub sample_count: usize,
}

impl EmpiricalDensity {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    /// `Σ_i |mass_i − (F(e_{i+1}) − F(e_i))|`: L1 distance between the
    /// histogram and a reference distribution binned on the same grid.
    pub fn l1_error(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let w = self.bin_width();
        self.edges
            .windows(2)
            .zip(&self.density)
            .map(|(e, &d)| (d * w - (cdf(e[1]) - cdf(e[0]))).abs())
            .sum()
    }

    /// CSV `u,density` with bin centers.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "u,density")?;
        for (u, d) in self.centers().zip(&self.density) {
            writeln!(out, "{u},{d}")?;
        }
        out.flush()
    }
}

/// Histogram `u_x = N·b_x/M` over all `N` outcomes (unobserved ones count as
/// `u = 0`) on `bins` uniform bins spanning `[0, max u]`.
pub fn empirical_density(h: &OutcomeHistogram, bins: usize) -> Result<EmpiricalDensity, HaarError> {
    if bins < 2 {
        return Err(HaarError::InvalidParameter(format!("need at least 2 bins, got {bins}")));
    }
    let dim = h.dim();
    let scale = dim as f64 / h.total() as f64;
    let max_count = h.occupied().iter().map(|&(_, c)| c).max().unwrap_or(0);
    let hi = max_count as f64 * scale;
    let hi = if hi > 0.0 { hi } else { 1.0 };
    let width = hi / bins as f64;

    let mut counts = vec![0u64; bins];
    let bin_of = |u: f64| ((u / width) as usize).min(bins - 1);
    counts[0] += dim - h.occupied().len() as u64;
    for &(_, c) in h.occupied() {
        counts[bin_of(c as f64 * scale)] += 1;
    }
    let norm = dim as f64 * width;
    Ok(EmpiricalDensity {
        edges: (0..=bins).map(|i| i as f64 * width).collect(),
        density: counts.iter().map(|&c| c as f64 / norm).collect(),
        sample_count: dim as usize,
    })
}

/// Linear cross-entropy fidelity `2ⁿ · mean_i p(x_i) − 1`.
pub fn xeb_fidelity(sample: &BitArray, probs: &[f64]) -> Result<f64, HaarError> {
    let n = sample.n_qubits();
    if n >= usize::BITS as usize || probs.len() != 1usize << n {
        return Err(HaarError::ShapeMismatch(format!(
            "{} probabilities for a {n}-qubit sample",
            probs.len()
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(HaarError::InvalidParameter(format!("probabilities sum to {total}")));
    }
    let xs = dataset::rows_as_integers(sample)?;
    let mean = xs.iter().map(|&x| probs[x as usize]).sum::<f64>() / xs.len() as f64;
    Ok(probs.len() as f64 * mean - 1.0)
}

fn schur_eigenvalues(u: &DMatrix<Complex64>) -> Result<Vec<Complex64>, HaarError> {
    let schur = Schur::try_new(u.clone(), 1e-14, 10_000).ok_or(HaarError::EigenFailure)?;
    Ok(schur.eigenvalues().ok_or(HaarError::EigenFailure)?.iter().copied().collect())
}

/// All eigenvalues of all samples, in sample order.
pub fn unitary_eigenvalues(samples: &[UnitarySample]) -> Result<Vec<Complex64>, HaarError> {
    if samples.is_empty() {
        return Err(HaarError::InvalidParameter("no unitaries given".into()));
    }
    let per_sample: Vec<Vec<Complex64>> = samples
        .par_iter()
        .map(|s| schur_eigenvalues(&s.unitary))
        .collect::<Result<_, _>>()?;
    let eigs: Vec<Complex64> = per_sample.concat();
    let deviation = eigs.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    if deviation > UNITARITY_TOL {
        return Err(HaarError::NonUnitary { deviation });
    }
    Ok(eigs)
}

/// Phase of a unit-modulus eigenvalue in `(−π, π]`.
pub fn phase(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Eigenphases in `(−π, π]` of every sample.
pub fn unitary_eigenphases(samples: &[UnitarySample]) -> Result<Vec<f64>, HaarError> {
    Ok(unitary_eigenvalues(samples)?.into_iter().map(phase).collect())
}

/// CSV `re,im,phase`.
pub fn write_eigenphase_csv<W: Write>(eigenvalues: &[Complex64], mut out: W) -> io::Result<()> {
    writeln!(out, "re,im,phase")?;
    for z in eigenvalues {
        writeln!(out, "{},{},{}", z.re, z.im, phase(*z))?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn identity(dim: usize) -> DMatrix<Complex64> {
        DMatrix::identity(dim, dim)
    }

    #[test]
    fn sampled_unitaries_are_unitary() {
        for n in 1..=5 {
            let u = sample_cue_unitary(n, 3).unwrap();
            assert!(u.unitarity_error() < 1e-10, "n={n}");
            let psum: f64 = u.probs.iter().sum();
            assert!((psum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_qubit_eigenvalues_on_unit_circle() {
        let u = sample_cue_unitary(1, 9).unwrap();
        for z in unitary_eigenvalues(&[u]).unwrap() {
            assert!((z.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fast_state_equals_first_column_of_unitary() {
        for n in [1, 3, 6] {
            let full = sample_cue_unitary(n, 42).unwrap();
            let state = sample_cue_state(n, 42).unwrap();
            for (a, b) in full.amplitudes.iter().zip(&state.amplitudes) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_element_zero_matches_single_draw() {
        let batch = sample_cue_unitaries(3, 4, 5).unwrap();
        let single = sample_cue_unitary(3, 5).unwrap();
        assert_eq!(batch[0].unitary, single.unitary);
        assert_ne!(batch[1].unitary, single.unitary);
    }

    #[test]
    fn sampler_width_cap() {
        assert!(matches!(
            sample_cue_unitary(13, 0),
            Err(HaarError::DimensionTooLarge { n: 13, max: 12 })
        ));
        assert!(matches!(
            sample_cue_bitstrings(13, 10, 0, ShotMode::FixedUnitary),
            Err(HaarError::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn identity_unitary_always_yields_zero_string() {
        let s = UnitarySample::from_unitary(2, identity(4)).unwrap();
        let bits = sample_shots(&s.probs, 2, 100, 1).unwrap();
        assert!(bits.iter().all(|&b| b == 0));
        assert_eq!(bits.len(), 200);
    }

    #[test]
    fn shots_follow_stored_probabilities() {
        let rows = 100_000;
        let a = sample_cue_bitstrings(6, rows, 8, ShotMode::FixedUnitary).unwrap();
        let state = sample_cue_state(6, 8).unwrap();
        let h = dataset::to_histogram(&a).unwrap();
        for (x, &p) in state.probs.iter().enumerate() {
            let freq = h.probability(x as u64);
            assert!((freq - p).abs() <= 4.0 * (p / rows as f64).sqrt(), "x={x}: {freq} vs {p}");
        }
    }

    #[test]
    fn fresh_unitaries_give_unbiased_bits() {
        let a = sample_cue_bitstrings(8, 50_000, 4, ShotMode::FreshUnitaryPerShot).unwrap();
        let sigma = (0.25 / a.bits().len() as f64).sqrt();
        assert!((a.one_fraction() - 0.5).abs() < 4.0 * sigma);
        assert_eq!(a.meta().source, Source::CueSampler);
    }

    #[test]
    fn density_point_values() {
        let d = cue_eigvec_density(0.0, CueDim::Finite(4096)).unwrap();
        assert!((d - 4095.0 / 4096.0).abs() < 1e-12);
        let d = cue_eigvec_density(1.0, CueDim::Asymptotic).unwrap();
        assert!((d - (-1f64).exp()).abs() < 1e-15);
        assert!(matches!(
            cue_eigvec_density(-0.1, CueDim::Finite(16)),
            Err(HaarError::DomainError { .. })
        ));
        assert!(cue_eigvec_density(16.5, CueDim::Finite(16)).is_err());
    }

    /// Composite Simpson over `[0, N]`, independent of the closed-form CDF.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
        let h = (b - a) / intervals as f64;
        let mut s = f(a) + f(b);
        for i in 1..intervals {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn density_integrates_to_one() {
        for n in [2u64, 3, 64, 1024, 4096] {
            let dim = CueDim::Finite(n);
            let integral = simpson(|u| cue_eigvec_density(u, dim).unwrap(), 0.0, n as f64, 200_000);
            assert!((integral - 1.0).abs() < 1e-8, "N={n}: {integral}");
        }
    }

    #[test]
    fn density_decreases() {
        for n in [2u64, 5, 1024] {
            let dim = CueDim::Finite(n);
            let vals: Vec<f64> = (0..=100)
                .map(|i| cue_eigvec_density(i as f64 * n as f64 / 100.0, dim).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn flat_histogram_concentrates_in_one_bin() {
        let n = 4;
        let outcomes: Vec<u64> = (0..16u64).flat_map(|x| std::iter::repeat_n(x, 10)).collect();
        let h = OutcomeHistogram::from_outcomes(n, outcomes);
        let d = empirical_density(&h, 10).unwrap();
        let occupied: Vec<usize> = (0..10).filter(|&i| d.density[i] > 0.0).collect();
        assert_eq!(occupied.len(), 1);
        let i = occupied[0];
        assert!(d.edges[i] <= 1.0 && 1.0 <= d.edges[i + 1]);
        assert!((d.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_needs_two_bins() {
        let h = OutcomeHistogram::from_outcomes(1, vec![0, 1]);
        assert!(empirical_density(&h, 1).is_err());
    }

    #[test]
    fn classical_density_is_narrow_around_one() {
        let a = dataset::generate_classical(12, 500_000, 3, 0.5).unwrap();
        let h = dataset::to_histogram(&a).unwrap();
        let d = empirical_density(&h, 40).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-6);
        let us: Vec<f64> = h.dense_counts().iter().map(|&c| c as f64 * 4096.0 / 500_000.0).collect();
        let mean = us.iter().sum::<f64>() / us.len() as f64;
        let sd = (us.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / us.len() as f64).sqrt();
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((sd - (4096.0f64 / 500_000.0).sqrt()).abs() < 0.01, "sd={sd}");
    }

    #[test]
    fn xeb_of_uniform_and_ideal_samples() {
        let n = 8;
        let state = sample_cue_state(n, 21).unwrap();
        let rows = 100_000;
        let uniform = dataset::generate_classical(n, rows, 5, 0.5).unwrap();
        let f0 = xeb_fidelity(&uniform, &state.probs).unwrap();
        let mean = 1.0 / 256.0;
        let sd = (state.probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / 256.0).sqrt();
        assert!(f0.abs() < 4.0 * 256.0 * sd / (rows as f64).sqrt(), "{f0}");

        let ideal = sample_cue_bitstrings(n, rows, 21, ShotMode::FixedUnitary).unwrap();
        let f1 = xeb_fidelity(&ideal, &state.probs).unwrap();
        let expected = 256.0 * state.probs.iter().map(|p| p * p).sum::<f64>() - 1.0;
        assert!((f1 - expected).abs() < 0.1, "{f1} vs {expected}");
    }

    #[test]
    fn xeb_shape_errors() {
        let a = dataset::generate_classical(3, 10, 0, 0.5).unwrap();
        assert!(matches!(xeb_fidelity(&a, &[0.5, 0.5]), Err(HaarError::ShapeMismatch(_))));
        assert!(xeb_fidelity(&a, &[0.2; 8]).is_err());
    }

    #[test]
    fn eigenphases_of_simple_unitaries() {
        let id = UnitarySample::from_unitary(1, identity(2)).unwrap();
        assert_eq!(unitary_eigenphases(&[id]).unwrap(), vec![0.0, 0.0]);

        let mut d = identity(2);
        d[(1, 1)] = Complex64::new(-1.0, 0.0);
        let d = UnitarySample::from_unitary(1, d).unwrap();
        let mut ph = unitary_eigenphases(&[d]).unwrap();
        ph.sort_by(f64::total_cmp);
        assert_eq!(ph, vec![0.0, PI]);
    }

    #[test]
    fn eigenphases_reject_non_unitary() {
        let m = identity(2) * Complex64::new(1.1, 0.0);
        let s = UnitarySample::from_unitary(1, m).unwrap();
        assert!(matches!(unitary_eigenphases(&[s]), Err(HaarError::NonUnitary { .. })));
        assert!(unitary_eigenphases(&[]).is_err());
    }

    #[test]
    fn eigenphases_are_uniform() {
        let samples = sample_cue_unitaries(6, 1000, 17).unwrap();
        let phases = unitary_eigenphases(&samples).unwrap();
        let mut bins = [0u64; 32];
        for p in &phases {
            let i = (((p + PI) / (2.0 * PI)) * 32.0) as usize;
            bins[i.min(31)] += 1;
        }
        let (_, p) = stats::chi_square_uniform(&bins);
        assert!(p >= 0.01, "p={p}");
    }

    fn corner_phase_bins(samples: impl Iterator<Item = DMatrix<Complex64>>) -> [u64; 16] {
        let mut bins = [0u64; 16];
        for u in samples {
            let i = (((phase(u[(0, 0)]) + PI) / (2.0 * PI)) * 16.0) as usize;
            bins[i.min(15)] += 1;
        }
        bins
    }

    /// QR in the convention "Q has a positive real diagonal": a valid factorization
    /// `Q' = QD`, `R' = D⁻¹R` for a diagonal unitary `D`.
    fn positive_q_diagonal_qr(a: DMatrix<Complex64>) -> (DMatrix<Complex64>, Vec<Complex64>) {
        let qr = a.qr();
        let (mut q, r) = (qr.q(), qr.r());
        let mut r_diag = Vec::new();
        for k in 0..q.ncols() {
            let d = q[(k, k)].conj() / q[(k, k)].norm();
            for v in q.column_mut(k).iter_mut() {
                *v *= d;
            }
            r_diag.push(r[(k, k)] / d);
        }
        (q, r_diag)
    }

    #[test]
    fn phase_correction_removes_qr_convention() {
        let draws = |i: u64| {
            let mut rng = stream_rng(99, i);
            let data: Vec<Complex64> = (0..64).map(|_| standard_complex_gaussian(&mut rng)).collect();
            DMatrix::from_vec(8, 8, data)
        };

        // both conventions agree once corrected
        for i in 0..5 {
            let reference = haar_unitary(8, &mut stream_rng(99, i));
            let (q, r_diag) = positive_q_diagonal_qr(draws(i));
            assert!((correct_phases(q, &r_diag) - reference).norm() < 1e-12);
        }

        let corrected = corner_phase_bins((0..800).map(|i| {
            let (q, r_diag) = positive_q_diagonal_qr(draws(i));
            correct_phases(q, &r_diag)
        }));
        let (_, p) = stats::chi_square_uniform(&corrected);
        assert!(p >= 0.01, "corrected p={p}");

        let plain = corner_phase_bins((0..800).map(|i| positive_q_diagonal_qr(draws(i)).0));
        let (_, p) = stats::chi_square_uniform(&plain);
        assert!(p < 1e-6, "uncorrected p={p}");
    }

    #[test]
    fn haar_measure_is_left_invariant() {
        let v = sample_cue_unitary(6, 1234).unwrap().unitary;
        let samples = sample_cue_unitaries(6, 2000, 55).unwrap();
        let direct: Vec<f64> = samples.iter().map(|s| 64.0 * s.probs[0]).collect();
        let rotated: Vec<f64> = sample_cue_unitaries(6, 2000, 56)
            .unwrap()
            .iter()
            .map(|s| {
                let c = (&v * &s.unitary).column(0).into_owned();
                64.0 * c[0].norm_sqr()
            })
            .collect();
        let d = stats::ks_two_sample(&direct, &rotated);
        assert!(stats::ks_pvalue(d, 1000.0) >= 0.01, "d={d}");
    }

    #[test]
    fn first_probability_has_mean_one_over_n() {
        let samples = sample_cue_unitaries(6, 2000, 77).unwrap();
        let mean = samples.iter().map(|s| s.probs[0]).sum::<f64>() / 2000.0;
        let se = (1.0 / 64.0) / (2000f64).sqrt();
        assert!((mean - 1.0 / 64.0).abs() < 3.0 * se);
        let scaled: Vec<f64> = samples.iter().map(|s| 64.0 * s.probs[0]).collect();
        let d = stats::ks_statistic(&scaled, |u| 1.0 - (-u).exp());
        assert!(stats::ks_pvalue(d, 2000.0) >= 0.01, "d={d}");
    }
}
