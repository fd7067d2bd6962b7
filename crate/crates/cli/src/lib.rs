//! Command-line front end for the `qra` randomness audit.
//!
//! Every command reads its inputs (sample files or generator specs), writes
//! payload files atomically under `--out`, and finishes with a
//! `manifest_<command>.json` that echoes the full configuration and the
//! SHA-256 of every file written.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use qra_core::dataset::{self, DatasetError};
use qra_core::ensembles::EnsembleError;
use qra_core::haar::{self, HaarError};
use qra_core::nist::NistError;
use qra_core::rng::DEFAULT_SEED;
use qra_core::transport::TransportError;
use qra_core::{BitArray, LabeledSample};
use serde::Serialize;
use thiserror::Error;

pub mod output;
pub mod report;
pub mod sections;
pub mod spec;

use output::{sanitize, unique_label, unique_labels, OutputSet};
use spec::{looks_like_spec, GeneratedSeeds, GeneratorSpec, SpecParseError};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "QRA_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecParseError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Haar(#[from] HaarError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Nist(#[from] NistError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0} report section(s) failed")]
    SectionsFailed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "qra", version, about = "Randomness audit of random-circuit bit-string samples")]
pub struct Cli {
    /// Base seed for every generator and sampler.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "qra_out")]
    pub out: PathBuf,
    /// Payload format for analysis outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Command {
    /// Write sample files from generator specs
    /// (`classical:n=..,M=..,p1=..` or `cue:n=..,M=..,mode=fixed|fresh`).
    Generate {
        #[arg(required = true)]
        specs: Vec<String>,
    },
    /// Average square bit-matrix and per-qubit bias.
    Heatmap { input: String },
    /// Ginibre spectra of the square ensemble.
    Spectra {
        input: String,
        /// Number of matrices to diagonalize.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Use the mean-shifted ±1 matrices.
        #[arg(long)]
        shifted: bool,
    },
    /// Wishart spectra with the Marchenko–Pastur curve.
    Wishart {
        input: String,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
    },
    /// NIST-style randomness battery.
    Nist { input: String },
    /// Pairwise Wasserstein-1 distances and a 2-D embedding.
    Wasserstein {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<String>,
        /// Divide distances by 2ⁿ.
        #[arg(long)]
        normalize: bool,
    },
    /// Linear cross-entropy fidelity against given outcome probabilities.
    Xeb {
        input: String,
        /// CSV with a `p` column holding 2ⁿ probabilities in outcome order.
        #[arg(long, conflicts_with = "unitary_seed", required_unless_present = "unitary_seed")]
        probs: Option<PathBuf>,
        /// Score against the CUE state sampled with this seed.
        #[arg(long)]
        unitary_seed: Option<u64>,
    },
    /// Outcome histogram and scaled density against the CUE eigenvector law.
    Density {
        input: String,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Every analysis over all inputs, consolidated into `report.json`.
    Report {
        #[arg(required = true)]
        inputs: Vec<String>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        normalize: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Heatmap { .. } => "heatmap",
            Command::Spectra { .. } => "spectra",
            Command::Wishart { .. } => "wishart",
            Command::Nist { .. } => "nist",
            Command::Wasserstein { .. } => "wasserstein",
            Command::Xeb { .. } => "xeb",
            Command::Density { .. } => "density",
            Command::Report { .. } => "report",
        }
    }
}

/// A sample read from disk or realized from a generator spec.
#[derive(Debug, Clone)]
pub struct Input {
    /// The argument as given.
    pub source: String,
    pub array: BitArray,
    pub seeds: Option<GeneratedSeeds>,
}

pub fn load_input(source: &str, seed: u64) -> Result<Input, CliError> {
    if looks_like_spec(source) {
        let spec: GeneratorSpec = source.parse()?;
        let (array, seeds) = spec.generate(seed)?;
        return Ok(Input { source: source.to_string(), array, seeds: Some(seeds) });
    }
    let array = dataset::load_auto(Path::new(source))?;
    Ok(Input { source: source.to_string(), array, seeds: None })
}

/// Applies `QRA_THREADS` to the global thread pool. Returns the cap, if any.
pub fn init_threads() -> Option<usize> {
    let n = std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)?;
    // A pool that is already initialized keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Some(n)
}

#[derive(Serialize)]
struct RunConfig<'a> {
    #[serde(flatten)]
    cli: &'a Cli,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<InputRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub source: String,
    pub label: String,
    pub n_qubits: usize,
    pub rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<GeneratedSeeds>,
}

impl InputRecord {
    fn new(i: &Input, label: String) -> Self {
        InputRecord {
            source: i.source.clone(),
            label,
            n_qubits: i.array.n_qubits(),
            rows: i.array.rows(),
            seeds: i.seeds.clone(),
        }
    }
}

/// Outcome of a command: a JSON summary for stdout and the manifest path.
#[derive(Debug)]
pub struct RunOutput {
    pub summary: serde_json::Value,
    pub manifest: PathBuf,
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("summaries serialize")
}

pub fn run(cli: &Cli) -> Result<RunOutput, CliError> {
    let mut out = OutputSet::new(&cli.out)?;
    let mut records = Vec::new();
    let single = |source: &str, records: &mut Vec<InputRecord>| -> Result<BitArray, CliError> {
        let input = load_input(source, cli.seed)?;
        records.push(InputRecord::new(&input, input.array.meta().label.clone()));
        Ok(input.array)
    };
    let summary = match &cli.command {
        Command::Generate { specs } => {
            let parsed: Vec<GeneratorSpec> = specs.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            let mut written = Vec::new();
            let mut used: Vec<String> = Vec::new();
            for (spec, text) in parsed.iter().zip(specs) {
                let (array, seeds) = spec.generate(cli.seed)?;
                let label = unique_label(&used, &sanitize(&array.meta().label));
                used.push(label.clone());
                let file = out.write_with(&format!("{label}.txt"), |b| array.write_to(b))?;
                records.push(InputRecord::new(&Input { source: text.clone(), array, seeds: Some(seeds) }, label));
                written.push(file);
            }
            serde_json::json!({ "files": written })
        }
        Command::Heatmap { input } => to_value(&sections::heatmap(&single(input, &mut records)?, &mut out, "", cli.format)?),
        Command::Spectra { input, count, shifted } => {
            to_value(&sections::ginibre(&single(input, &mut records)?, *count, *shifted, &mut out, "", cli.format)?)
        }
        Command::Wishart { input, gamma } => {
            to_value(&sections::wishart(&single(input, &mut records)?, *gamma, &mut out, "", cli.format)?)
        }
        Command::Nist { input } => to_value(&sections::nist_battery(&single(input, &mut records)?, &mut out, "", cli.format)?),
        Command::Density { input, bins } => {
            to_value(&sections::density(&single(input, &mut records)?, *bins, &mut out, "", cli.format)?)
        }
        Command::Wasserstein { inputs, normalize } => {
            let arrays: Vec<BitArray> = inputs.iter().map(|i| single(i, &mut records)).collect::<Result<_, _>>()?;
            let labels = unique_labels(&arrays.iter().map(|a| a.meta().label.clone()).collect::<Vec<_>>());
            let samples: Vec<LabeledSample> = arrays
                .iter()
                .zip(labels)
                .map(|(a, l)| Ok(LabeledSample::from_array(a)?.relabel(l)))
                .collect::<Result<_, CliError>>()?;
            to_value(&sections::wasserstein(&samples, *normalize, &mut out, "", cli.format)?)
        }
        Command::Xeb { input, probs, unitary_seed } => {
            let a = single(input, &mut records)?;
            let (p, source) = match (probs, unitary_seed) {
                (Some(path), _) => (read_probs_csv(path)?, format!("file:{}", path.display())),
                (None, Some(s)) => (haar::sample_cue_state(a.n_qubits(), *s)?.probs, format!("cue_state:seed={s}")),
                (None, None) => return Err(CliError::Usage("xeb needs --probs or --unitary-seed".into())),
            };
            let fidelity = haar::xeb_fidelity(&a, &p)?;
            let summary = serde_json::json!({
                "input": a.meta().label,
                "n_qubits": a.n_qubits(),
                "rows": a.rows(),
                "probabilities": source,
                "fidelity": fidelity,
            });
            match cli.format {
                Format::Json => out.write_json("xeb.json", &summary)?,
                Format::Csv => out.write("xeb.csv", format!("input,fidelity\n{},{fidelity}\n", a.meta().label).as_bytes())?,
            };
            summary
        }
        Command::Report { inputs, count, gamma, bins, normalize } => {
            let options = report::ReportOptions { count: *count, gamma: *gamma, bins: *bins, normalize: *normalize };
            let (rep, recs) = report::build(inputs, cli.seed, &options, &mut out)?;
            records = recs;
            let failed = rep.failed_sections();
            let config = RunConfig { cli, inputs: records };
            let manifest = out.finish(cli.command.name(), &config)?;
            if failed > 0 {
                return Err(CliError::SectionsFailed(failed));
            }
            return Ok(RunOutput { summary: serde_json::json!({ "report": "report.json" }), manifest });
        }
    };
    let config = RunConfig { cli, inputs: records };
    let manifest = out.finish(cli.command.name(), &config)?;
    Ok(RunOutput { summary, manifest })
}

/// Reads outcome probabilities from a CSV with a `p` column, or a single
/// unnamed column.
pub fn read_probs_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = headers.iter().position(|h| h.trim() == "p");
    let mut probs = Vec::new();
    let col = match (col, headers.len()) {
        (Some(c), _) => c,
        (None, 1) => {
            // A numeric first line is data, not a header.
            if let Ok(v) = headers[0].trim().parse::<f64>() {
                probs.push(v);
            }
            0
        }
        _ => return Err(CliError::Usage(format!("{} has no `p` column", path.display()))),
    };
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let v = rec.get(col).unwrap_or("").trim();
        probs.push(
            v.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{}: row {} has non-numeric p `{v}`", path.display(), i + 2)))?,
        );
    }
    Ok(probs)
}
