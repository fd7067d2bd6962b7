//! Wasserstein-1 distances between samples of integer-decoded bit-strings.
//!
//! With the ground metric `|x − y|` on the real line the optimal transport
//! cost has a closed form: for equal sample sizes it pairs order statistics,
//! and in general it is the area between the two empirical CDFs. Both are
//! evaluated in exact integer arithmetic and divided once at the end.

use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{rows_as_integers, BitArray, DatasetError};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("samples have different widths: {0} and {1} qubits")]
    ShapeMismatch(usize, usize),
    #[error("sample {0:?} is empty")]
    Empty(String),
    #[error("sample {label:?} holds {value}, which does not fit in {n_qubits} bits")]
    ValueOutOfRange { label: String, value: u64, n_qubits: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("centered Gram matrix has {positive} positive eigenvalue(s); points lie on a line")]
    DegenerateSpectrum { positive: usize, embedding: Embedding },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// A labeled multiset of integer outcomes, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    label: String,
    n_qubits: usize,
    sorted: Vec<u64>,
}

impl LabeledSample {
    pub fn new(label: impl Into<String>, n_qubits: usize, mut values: Vec<u64>) -> Result<Self, TransportError> {
        let label = label.into();
        if values.is_empty() {
            return Err(TransportError::Empty(label));
        }
        values.sort_unstable();
        let max = *values.last().unwrap();
        if n_qubits < 64 && max >> n_qubits != 0 {
            return Err(TransportError::ValueOutOfRange { label, value: max, n_qubits });
        }
        Ok(LabeledSample { label, n_qubits, sorted: values })
    }

    /// Rows of `a` read as big-endian integers, labeled by the sample label.
    pub fn from_array(a: &BitArray) -> Result<Self, TransportError> {
        Self::new(a.meta().label.clone(), a.n_qubits(), rows_as_integers(a)?)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Values in ascending order.
    pub fn sorted_values(&self) -> &[u64] {
        &self.sorted
    }
}

/// Wasserstein-1 distance in outcome units.
pub fn wasserstein1(x: &LabeledSample, y: &LabeledSample) -> Result<f64, TransportError> {
    if x.n_qubits != y.n_qubits {
        return Err(TransportError::ShapeMismatch(x.n_qubits, y.n_qubits));
    }
    Ok(wasserstein1_sorted(&x.sorted, &y.sorted))
}

/// Wasserstein-1 distance between two nonempty ascending slices.
pub fn wasserstein1_sorted(x: &[u64], y: &[u64]) -> f64 {
    if x.len() == y.len() {
        let total: u128 = x.iter().zip(y).map(|(&a, &b)| a.abs_diff(b) as u128).sum();
        return total as f64 / x.len() as f64;
    }
    // ∫|F_x − F_y| dt with F_x = i/m, F_y = j/n on each gap between
    // merged breakpoints; the integrand scaled by m·n is |i·n − j·m|.
    let (m, n) = (x.len() as u128, y.len() as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total: u128 = 0;
    let mut t = x[0].min(y[0]);
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        let gap = (next - t) as u128;
        total += gap * (i as u128 * n).abs_diff(j as u128 * m);
        t = next;
        while i < x.len() && x[i] == t {
            i += 1;
        }
        while j < y.len() && y[j] == t {
            j += 1;
        }
    }
    total as f64 / (m * n) as f64
}

/// Symmetric matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub d: DMatrix<f64>,
    /// Entries divided by `2ⁿ`.
    pub normalized: bool,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal and non-negativity.
    pub fn from_entries(labels: Vec<String>, d: DMatrix<f64>, normalized: bool) -> Result<Self, TransportError> {
        let k = labels.len();
        if d.nrows() != k || d.ncols() != k {
            return Err(TransportError::InvalidMatrix(format!("{k} labels for a {}×{} matrix", d.nrows(), d.ncols())));
        }
        for i in 0..k {
            if d[(i, i)] != 0.0 {
                return Err(TransportError::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if !(d[(i, j)] >= 0.0) || (d[(i, j)] - d[(j, i)]).abs() > 1e-12 * d[(i, j)].abs().max(1.0) {
                    return Err(TransportError::InvalidMatrix(format!("entries ({i},{j}) not symmetric and non-negative")));
                }
            }
        }
        Ok(DistanceMatrix { labels, d, normalized })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    /// First row is `label,<labels…>`, then one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "label,{}", self.labels.join(","))?;
        for (i, l) in self.labels.iter().enumerate() {
            let row: Vec<String> = (0..self.len()).map(|j| self.d[(i, j)].to_string()).collect();
            writeln!(out, "{l},{}", row.join(","))?;
        }
        out.flush()
    }
}

/// All pairwise distances; `normalize` divides by `2ⁿ`.
pub fn distance_matrix(samples: &[LabeledSample], normalize: bool) -> Result<DistanceMatrix, TransportError> {
    if samples.len() < 2 {
        return Err(TransportError::TooFewSamples { needed: 2, got: samples.len() });
    }
    let n = samples[0].n_qubits;
    if let Some(s) = samples.iter().find(|s| s.n_qubits != n) {
        return Err(TransportError::ShapeMismatch(n, s.n_qubits));
    }
    let k = samples.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| wasserstein1_sorted(&samples[i].sorted, &samples[j].sorted))
        .collect();
    let scale = if normalize { 2f64.powi(n as i32) } else { 1.0 };
    let mut d = DMatrix::zeros(k, k);
    for (&(i, j), v) in pairs.iter().zip(values) {
        d[(i, j)] = v / scale;
        d[(j, i)] = v / scale;
    }
    Ok(DistanceMatrix { labels: samples.iter().map(|s| s.label.clone()).collect(), d, normalized: normalize })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

/// Planar coordinates from classical multidimensional scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub points: Vec<EmbeddedPoint>,
    /// Two largest eigenvalues of the double-centered Gram matrix.
    pub eigenvalues: [f64; 2],
    /// Root mean square of `‖pᵢ − pⱼ‖ − dᵢⱼ` over pairs `i < j`.
    pub rms_residual: f64,
}

impl Embedding {
    /// CSV `label,x,y`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "label,x,y")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.label, p.x, p.y)?;
        }
        out.flush()
    }
}

/// Classical MDS into the plane.
///
/// The first point is placed at the origin, the second on the positive
/// x-axis, and the first point off that axis gets `y > 0`.
pub fn embed_2d(m: &DistanceMatrix) -> Result<Embedding, TransportError> {
    let k = m.len();
    if k < 3 {
        return Err(TransportError::TooFewSamples { needed: 3, got: k });
    }
    let d2 = m.d.map(|v| v * v);
    let row_means: Vec<f64> = (0..k).map(|i| d2.row(i).mean()).collect();
    let total_mean = d2.mean();
    let b = DMatrix::from_fn(k, k, |i, j| -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + total_mean));
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = 1e-9 * top.max(f64::MIN_POSITIVE);
    let positive = order.iter().filter(|&&i| eig.eigenvalues[i] > tol).count();
    let lambda = [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]];

    let coord = |axis: usize, i: usize| {
        let l = lambda[axis];
        if l > tol {
            eig.eigenvectors[(i, order[axis])] * l.sqrt()
        } else {
            0.0
        }
    };
    let mut pts: Vec<[f64; 2]> = (0..k).map(|i| [coord(0, i), coord(1, i)]).collect();
    canonicalize(&mut pts, tol.sqrt().max(1e-12));

    let mut sq = 0.0;
    let mut pairs = 0usize;
    for i in 0..k {
        for j in i + 1..k {
            let e = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
            sq += (e - m.d[(i, j)]).powi(2);
            pairs += 1;
        }
    }
    let embedding = Embedding {
        points: m
            .labels
            .iter()
            .zip(&pts)
            .map(|(l, p)| EmbeddedPoint { label: l.clone(), x: p[0], y: p[1] })
            .collect(),
        eigenvalues: lambda,
        rms_residual: (sq / pairs as f64).sqrt(),
    };
    if positive < 2 {
        return Err(TransportError::DegenerateSpectrum { positive, embedding });
    }
    Ok(embedding)
}

/// Translates, rotates and reflects into the canonical frame.
fn canonicalize(pts: &mut [[f64; 2]], eps: f64) {
    let origin = pts[0];
    for p in pts.iter_mut() {
        p[0] -= origin[0];
        p[1] -= origin[1];
    }
    if let Some(anchor) = pts.iter().skip(1).find(|p| p[0].hypot(p[1]) > eps).copied() {
        let r = anchor[0].hypot(anchor[1]);
        let (c, s) = (anchor[0] / r, anchor[1] / r);
        for p in pts.iter_mut() {
            let (x, y) = (p[0], p[1]);
            // `-0.0` from the rotation normalizes to `0.0` for stable output.
            p[0] = c * x + s * y + 0.0;
            p[1] = -s * x + c * y + 0.0;
        }
    }
    if let Some(off) = pts.iter().find(|p| p[1].abs() > eps) {
        if off[1] < 0.0 {
            for p in pts.iter_mut() {
                p[1] = -p[1] + 0.0;
            }
        }
    }
}
