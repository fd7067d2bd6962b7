//! Consolidated `report.json` over every input.
//!
//! Each per-input section holds one entry per input: the section summary,
//! an `error` object, or a `not_applicable` note when the analysis does not
//! apply to the sample (for example outcome histograms beyond 30 qubits).
//! Errors stay local to their section and input.

use qra_core::dataset::DatasetError;
use qra_core::LabeledSample;
use serde::Serialize;

use crate::output::{sanitize, unique_labels, OutputSet};
use crate::sections::{self, DensitySummary, GinibreSummary, HeatmapSummary, NistSummary, WassersteinSummary, WishartSummary};
use crate::{load_input, CliError, Format, Input, InputRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportOptions {
    pub count: usize,
    pub gamma: f64,
    pub bins: usize,
    pub normalize: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Entry<T> {
    Ok(T),
    NotApplicable { input: String, not_applicable: String },
    Error { input: String, error: ErrorObject },
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
}

impl ErrorObject {
    fn from_error(e: &CliError) -> Self {
        let debug = format!("{e:?}");
        // `Variant(Inner(..))` → `Variant.Inner`
        let kind = debug
            .split(|c: char| !c.is_alphanumeric())
            .filter(|s| !s.is_empty())
            .take(2)
            .collect::<Vec<_>>()
            .join(".");
        ErrorObject { kind, message: e.to_string() }
    }
}

impl<T> Entry<T> {
    fn is_error(&self) -> bool {
        matches!(self, Entry::Error { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputStatus {
    pub source: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_qubits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorObject>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum WassersteinSection {
    Ok(WassersteinSummary),
    Error { error: ErrorObject },
    /// Fewer than two usable inputs.
    Empty {},
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub seed: u64,
    pub options: ReportOptions,
    pub inputs: Vec<InputStatus>,
    pub heatmap: Vec<Entry<HeatmapSummary>>,
    pub density: Vec<Entry<DensitySummary>>,
    pub ginibre: Vec<Entry<GinibreSummary>>,
    pub wishart: Vec<Entry<WishartSummary>>,
    pub nist: Vec<Entry<NistSummary>>,
    pub wasserstein: WassersteinSection,
}

impl Report {
    /// Number of section entries (inputs included) that hold an error.
    pub fn failed_sections(&self) -> usize {
        let count = |v: &[bool]| v.iter().filter(|&&e| e).count();
        count(&self.inputs.iter().map(|i| i.error.is_some()).collect::<Vec<_>>())
            + count(&self.heatmap.iter().map(Entry::is_error).collect::<Vec<_>>())
            + count(&self.density.iter().map(Entry::is_error).collect::<Vec<_>>())
            + count(&self.ginibre.iter().map(Entry::is_error).collect::<Vec<_>>())
            + count(&self.wishart.iter().map(Entry::is_error).collect::<Vec<_>>())
            + count(&self.nist.iter().map(Entry::is_error).collect::<Vec<_>>())
            + matches!(self.wasserstein, WassersteinSection::Error { .. }) as usize
    }
}

fn entry<T>(label: &str, r: Result<T, CliError>) -> Entry<T> {
    match r {
        Ok(v) => Entry::Ok(v),
        Err(CliError::Dataset(DatasetError::TooWide { n, max })) => Entry::NotApplicable {
            input: label.to_string(),
            not_applicable: format!("{n} qubits exceed the {max}-qubit limit of this analysis"),
        },
        Err(e) => Entry::Error { input: label.to_string(), error: ErrorObject::from_error(&e) },
    }
}

fn error_entry<T>(label: &str, error: &ErrorObject) -> Entry<T> {
    Entry::Error { input: label.to_string(), error: error.clone() }
}

/// Runs every section, writes `report.json`, and returns the report with
/// the input records for the manifest.
pub fn build(
    sources: &[String],
    seed: u64,
    options: &ReportOptions,
    out: &mut OutputSet,
) -> Result<(Report, Vec<InputRecord>), CliError> {
    let loaded: Vec<Result<Input, CliError>> = sources.iter().map(|s| load_input(s, seed)).collect();
    let base_labels: Vec<String> = loaded
        .iter()
        .zip(sources)
        .map(|(r, s)| match r {
            Ok(i) => sanitize(&i.array.meta().label),
            Err(_) => sanitize(std::path::Path::new(s).file_stem().map(|f| f.to_string_lossy()).unwrap_or_default().as_ref()),
        })
        .collect();
    let labels = unique_labels(&base_labels);

    let mut report = Report {
        schema: SCHEMA_VERSION,
        seed,
        options: options.clone(),
        inputs: Vec::new(),
        heatmap: Vec::new(),
        density: Vec::new(),
        ginibre: Vec::new(),
        wishart: Vec::new(),
        nist: Vec::new(),
        wasserstein: WassersteinSection::Empty {},
    };
    let mut records = Vec::new();
    let mut samples = Vec::new();

    for ((result, source), label) in loaded.into_iter().zip(sources).zip(&labels) {
        let input = match result {
            Ok(i) => i,
            Err(e) => {
                let error = ErrorObject::from_error(&e);
                report.inputs.push(InputStatus { source: source.clone(), label: label.clone(), n_qubits: None, rows: None, error: Some(error.clone()) });
                report.heatmap.push(error_entry(label, &error));
                report.density.push(error_entry(label, &error));
                report.ginibre.push(error_entry(label, &error));
                report.wishart.push(error_entry(label, &error));
                report.nist.push(error_entry(label, &error));
                continue;
            }
        };
        let a = &input.array;
        report.inputs.push(InputStatus {
            source: source.clone(),
            label: label.clone(),
            n_qubits: Some(a.n_qubits()),
            rows: Some(a.rows()),
            error: None,
        });
        records.push(InputRecord::new(&input, label.clone()));
        let prefix = format!("{label}/");
        report.heatmap.push(entry(label, sections::heatmap(a, out, &prefix, Format::Csv)));
        report.density.push(entry(label, sections::density(a, options.bins, out, &prefix, Format::Csv)));
        let count = options.count.min(a.rows() / a.n_qubits());
        report.ginibre.push(entry(label, sections::ginibre(a, count, false, out, &prefix, Format::Csv)));
        report.wishart.push(entry(label, sections::wishart(a, options.gamma, out, &prefix, Format::Csv)));
        report.nist.push(entry(label, sections::nist_battery(a, out, &prefix, Format::Json)));
        match LabeledSample::from_array(a) {
            Ok(s) => samples.push(s.relabel(label.clone())),
            Err(e) => {
                report.wasserstein = WassersteinSection::Error { error: ErrorObject::from_error(&e.into()) };
            }
        }
    }

    if samples.len() >= 2 && !matches!(report.wasserstein, WassersteinSection::Error { .. }) {
        report.wasserstein = match sections::wasserstein(&samples, options.normalize, out, "wasserstein/", Format::Csv) {
            Ok(s) => WassersteinSection::Ok(s),
            Err(e) => WassersteinSection::Error { error: ErrorObject::from_error(&e) },
        };
    }
    out.write_json("report.json", &report)?;
    Ok((report, records))
}
