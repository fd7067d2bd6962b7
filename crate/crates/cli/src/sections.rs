//! One analysis per section. Each writes its payload files under a prefix
//! and returns a serializable summary that references them by path.

use qra_core::dataset::{self, OutcomeHistogram};
use qra_core::ensembles::{self, ComplexSpectrum, RealSpectrum, BERNOULLI_HALF_VARIANCE};
use qra_core::haar::{self, CueDim};
use qra_core::nist::{self, BatteryEntry};
use qra_core::transport::{self, TransportError};
use qra_core::{BitArray, LabeledSample};
use serde::Serialize;

use crate::output::OutputSet;
use crate::{CliError, Format};

/// Radius used for the circle-law containment fraction.
pub const CIRCLE_CHECK_RADIUS: f64 = 0.55;
/// Bins of the Marchenko–Pastur L1 comparison.
pub const MP_L1_BINS: usize = 40;
/// Points in emitted analytic curves.
pub const CURVE_POINTS: usize = 201;

fn path(prefix: &str, name: &str) -> String {
    format!("{prefix}{name}")
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapSummary {
    pub input: String,
    pub n_qubits: usize,
    pub rows: usize,
    pub matrices: usize,
    pub p1: f64,
    pub bias_threshold: f64,
    pub flagged_qubits: Vec<usize>,
    pub files: Vec<String>,
}

pub fn heatmap(a: &BitArray, out: &mut OutputSet, prefix: &str, format: Format) -> Result<HeatmapSummary, CliError> {
    let h = ensembles::heatmap(a)?;
    let bias = ensembles::column_bias_report(a);
    let mut files = Vec::new();
    match format {
        Format::Csv => {
            files.push(out.write_with(&path(prefix, "heatmap.csv"), |b| h.write_csv(b))?);
            files.push(out.write_with(&path(prefix, "columns.csv"), |b| {
                use std::io::Write;
                writeln!(b, "qubit,one_fraction,flagged")?;
                for c in &bias.columns {
                    writeln!(b, "{},{},{}", c.qubit, c.one_fraction, c.flagged as u8)?;
                }
                Ok(())
            })?);
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Payload<'a> {
                mean_matrix: Vec<Vec<f64>>,
                column_means: &'a [f64],
                flagged: Vec<bool>,
            }
            let payload = Payload {
                mean_matrix: (0..h.n).map(|i| h.mean_matrix.row(i).iter().copied().collect()).collect(),
                column_means: &h.column_means,
                flagged: bias.columns.iter().map(|c| c.flagged).collect(),
            };
            files.push(out.write_json(&path(prefix, "heatmap.json"), &payload)?);
        }
    }
    Ok(HeatmapSummary {
        input: a.meta().label.clone(),
        n_qubits: a.n_qubits(),
        rows: a.rows(),
        matrices: a.rows() / a.n_qubits(),
        p1: h.p1,
        bias_threshold: bias.threshold,
        flagged_qubits: bias.flagged().map(|c| c.qubit).collect(),
        files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySummary {
    pub input: String,
    pub n_qubits: usize,
    pub outcomes: u64,
    pub rows: usize,
    pub bins: usize,
    pub occupied_outcomes: usize,
    /// L1 distance of the binned density from the CUE eigenvector law.
    pub l1_error: f64,
    /// Mean of `p_x = b_x/M` over all outcomes and its standard error.
    pub mean_p: f64,
    pub mean_p_standard_error: f64,
    pub files: Vec<String>,
}

pub fn density(a: &BitArray, bins: usize, out: &mut OutputSet, prefix: &str, format: Format) -> Result<DensitySummary, CliError> {
    let hist = dataset::to_histogram(a)?;
    let d = haar::empirical_density(&hist, bins)?;
    let dim = CueDim::Finite(hist.dim());
    let curve = haar::cue_eigvec_curve(dim, *d.edges.last().unwrap(), CURVE_POINTS)?;
    let (mean_p, se) = mean_and_se(&hist);
    let mut files = Vec::new();
    match format {
        Format::Csv => {
            files.push(out.write_with(&path(prefix, "histogram.csv"), |b| hist.write_csv(b))?);
            files.push(out.write_with(&path(prefix, "density.csv"), |b| d.write_csv(b))?);
            files.push(out.write_with(&path(prefix, "density_curve.csv"), |b| haar::write_curve_csv(&curve, b))?);
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Payload<'a> {
                edges: &'a [f64],
                density: &'a [f64],
                curve: &'a [(f64, f64)],
                occupied: &'a [(u64, u64)],
            }
            let payload = Payload { edges: &d.edges, density: &d.density, curve: &curve, occupied: hist.occupied() };
            files.push(out.write_json(&path(prefix, "density.json"), &payload)?);
        }
    }
    Ok(DensitySummary {
        input: a.meta().label.clone(),
        n_qubits: a.n_qubits(),
        outcomes: hist.dim(),
        rows: a.rows(),
        bins,
        occupied_outcomes: hist.occupied().len(),
        l1_error: d.l1_error(|u| haar::cue_eigvec_cdf(u, dim)),
        mean_p,
        mean_p_standard_error: se,
        files,
    })
}

fn mean_and_se(h: &OutcomeHistogram) -> (f64, f64) {
    let n = h.dim() as f64;
    let m = h.total() as f64;
    let sum: f64 = h.occupied().iter().map(|&(_, c)| c as f64 / m).sum();
    let sum_sq: f64 = h.occupied().iter().map(|&(_, c)| (c as f64 / m).powi(2)).sum();
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct GinibreSummary {
    pub input: String,
    pub matrices: usize,
    pub shifted: bool,
    pub disk_radius: f64,
    pub eigenvalues: usize,
    pub outliers: usize,
    /// Fraction of non-outlier eigenvalues with modulus ≤ 0.55.
    pub bulk_inside_fraction: f64,
    /// Largest real part in each matrix.
    pub top_real: Vec<f64>,
    /// Matrices whose largest real eigenvalue lies in [3, 4].
    pub top_real_in_3_4: usize,
    pub files: Vec<String>,
}

pub fn ginibre(a: &BitArray, count: usize, shifted: bool, out: &mut OutputSet, prefix: &str, format: Format) -> Result<GinibreSummary, CliError> {
    let e = ensembles::slice_square(a)?;
    let s = ensembles::ginibre_spectrum(&e, count, shifted)?;
    let mut files = Vec::new();
    match format {
        Format::Csv => files.push(out.write_with(&path(prefix, "ginibre.csv"), |b| s.write_csv(b))?),
        Format::Json => files.push(out.write_json(&path(prefix, "ginibre.json"), &complex_payload(&s))?),
    }
    Ok(summarize_ginibre(a.meta().label.clone(), shifted, &s, files))
}

fn complex_payload(s: &ComplexSpectrum) -> serde_json::Value {
    serde_json::json!({
        "re": s.eigenvalues.iter().map(|z| z.re).collect::<Vec<_>>(),
        "im": s.eigenvalues.iter().map(|z| z.im).collect::<Vec<_>>(),
        "is_outlier": s.is_outlier,
    })
}

fn summarize_ginibre(input: String, shifted: bool, s: &ComplexSpectrum, files: Vec<String>) -> GinibreSummary {
    let bulk: Vec<_> = s.bulk().collect();
    let inside = bulk.iter().filter(|z| z.norm() <= CIRCLE_CHECK_RADIUS).count();
    let top_real: Vec<f64> = s.per_matrix().map(|m| m.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)).collect();
    GinibreSummary {
        input,
        matrices: s.matrix_count(),
        shifted,
        disk_radius: s.disk_radius,
        eigenvalues: s.eigenvalues.len(),
        outliers: s.outliers().count(),
        bulk_inside_fraction: if bulk.is_empty() { 0.0 } else { inside as f64 / bulk.len() as f64 },
        top_real_in_3_4: top_real.iter().filter(|t| (3.0..=4.0).contains(*t)).count(),
        top_real,
        files,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WishartSummary {
    pub input: String,
    pub gamma: f64,
    pub sigma2: f64,
    pub block_rows: usize,
    pub blocks: usize,
    pub bounds: (f64, f64),
    pub tolerance: f64,
    pub bulk_l1_error: f64,
    pub mean_block_maximum: f64,
    pub expected_outlier: f64,
    pub outliers: usize,
    pub files: Vec<String>,
}

pub fn wishart(a: &BitArray, gamma: f64, out: &mut OutputSet, prefix: &str, format: Format) -> Result<WishartSummary, CliError> {
    let s = ensembles::wishart_spectrum(a, gamma)?;
    let curve = ensembles::mp_curve(gamma, BERNOULLI_HALF_VARIANCE, CURVE_POINTS);
    let mut files = Vec::new();
    match format {
        Format::Csv => {
            files.push(out.write_with(&path(prefix, "wishart.csv"), |b| s.write_csv(b))?);
            files.push(out.write_with(&path(prefix, "mp_curve.csv"), |b| ensembles::write_mp_curve_csv(&curve, b))?);
        }
        Format::Json => {
            let payload = serde_json::json!({
                "lambda": s.eigenvalues,
                "is_outlier": s.is_outlier,
                "block_maxima": s.block_maxima,
                "curve": curve,
            });
            files.push(out.write_json(&path(prefix, "wishart.json"), &payload)?);
        }
    }
    Ok(summarize_wishart(a.meta().label.clone(), &s, files))
}

fn summarize_wishart(input: String, s: &RealSpectrum, files: Vec<String>) -> WishartSummary {
    WishartSummary {
        input,
        gamma: s.gamma,
        sigma2: s.sigma2,
        block_rows: s.block_rows,
        blocks: s.block_maxima.len(),
        bounds: s.bounds,
        tolerance: s.tolerance,
        bulk_l1_error: s.bulk_l1_error(MP_L1_BINS),
        mean_block_maximum: s.mean_block_maximum(),
        expected_outlier: s.expected_outlier,
        outliers: s.outliers().count(),
        files,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NistSummary {
    pub input: String,
    pub bits: usize,
    pub grid: String,
    pub entries: Vec<BatteryEntry>,
    pub files: Vec<String>,
}

pub fn nist_battery(a: &BitArray, out: &mut OutputSet, prefix: &str, format: Format) -> Result<NistSummary, CliError> {
    let entries = nist::run_battery(a);
    let grid = nist::verdict_grid(&entries);
    let mut files = vec![out.write(&path(prefix, "nist.txt"), grid.as_bytes())?];
    match format {
        Format::Json => files.push(out.write_json(&path(prefix, "nist.json"), &entries)?),
        Format::Csv => files.push(out.write_with(&path(prefix, "nist.csv"), |b| {
            use std::io::Write;
            writeln!(b, "test_id,name,statistic,p_values,verdict")?;
            for e in &entries {
                let id = e.test_id();
                match e.report() {
                    Some(r) => {
                        let ps: Vec<String> = r.p_values.iter().map(|p| p.to_string()).collect();
                        writeln!(b, "{:02},{},{},{},{}", id.number(), id.name(), r.statistic, ps.join(";"), r.verdict.letter())?
                    }
                    None => writeln!(b, "{:02},{},,,-", id.number(), id.name())?,
                }
            }
            Ok(())
        })?),
    }
    Ok(NistSummary { input: a.meta().label.clone(), bits: a.bits().len(), grid, entries, files })
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddedPointOut {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WassersteinSummary {
    pub labels: Vec<String>,
    pub normalized: bool,
    pub distances: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<EmbeddedPointOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_rms_residual: Option<f64>,
    /// Why the embedding is missing or degenerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_note: Option<String>,
    pub files: Vec<String>,
}

pub fn wasserstein(samples: &[LabeledSample], normalize: bool, out: &mut OutputSet, prefix: &str, format: Format) -> Result<WassersteinSummary, CliError> {
    let m = transport::distance_matrix(samples, normalize)?;
    let (embedding, note) = match transport::embed_2d(&m) {
        Ok(e) => (Some(e), None),
        Err(TransportError::DegenerateSpectrum { positive, embedding }) => {
            (Some(embedding), Some(format!("degenerate: {positive} positive eigenvalue(s), points on a line")))
        }
        Err(TransportError::TooFewSamples { .. }) => (None, Some("embedding needs at least 3 samples".into())),
        Err(e) => return Err(e.into()),
    };
    let mut files = Vec::new();
    match format {
        Format::Csv => {
            files.push(out.write_with(&path(prefix, "distances.csv"), |b| m.write_csv(b))?);
            if let Some(e) = &embedding {
                files.push(out.write_with(&path(prefix, "embedding.csv"), |b| e.write_csv(b))?);
            }
        }
        Format::Json => {}
    }
    let summary = WassersteinSummary {
        labels: m.labels.clone(),
        normalized: m.normalized,
        distances: (0..m.len()).map(|i| m.d.row(i).iter().copied().collect()).collect(),
        embedding_rms_residual: embedding.as_ref().map(|e| e.rms_residual),
        embedding: embedding.map(|e| {
            e.points.into_iter().map(|p| EmbeddedPointOut { label: p.label, x: p.x, y: p.y }).collect()
        }),
        embedding_note: note,
        files,
    };
    if format == Format::Json {
        let mut s = summary.clone();
        s.files.push(out.write_json(&path(prefix, "wasserstein.json"), &summary)?);
        return Ok(s);
    }
    Ok(summary)
}
