//! Generator specs such as `classical:n=12,M=1000,p1=0.5` or
//! `cue:n=6,M=100,mode=fixed`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use qra_core::haar::{self, ShotMode, MAX_SAMPLER_QUBITS};
use qra_core::rng::child_seed;
use qra_core::{dataset, BitArray};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("bad generator spec {spec:?}: {reason}")]
pub struct SpecParseError {
    pub spec: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Classical { n: usize, rows: usize, p1: f64, seed: Option<u64> },
    Cue { n: usize, rows: usize, mode: ShotMode, seed: Option<u64> },
}

/// True when `s` names a generator rather than a file.
pub fn looks_like_spec(s: &str) -> bool {
    s.starts_with("classical:") || s.starts_with("cue:")
}

impl FromStr for GeneratorSpec {
    type Err = SpecParseError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let fail = |reason: String| SpecParseError { spec: spec.to_string(), reason };
        let (kind, body) = spec.split_once(':').ok_or_else(|| fail("expected `<kind>:<key>=<value>,…`".into()))?;
        let mut fields = BTreeMap::new();
        for pair in body.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| fail(format!("`{pair}` is not key=value")))?;
            if fields.insert(k.trim(), v.trim()).is_some() {
                return Err(fail(format!("key `{k}` given twice")));
            }
        }
        let mut take = |key: &str| fields.remove(key);
        let int = |key: &str, v: Option<&str>| -> Result<Option<u64>, SpecParseError> {
            v.map(|v| v.parse::<u64>().map_err(|_| fail(format!("`{key}` must be an unsigned integer, got `{v}`"))))
                .transpose()
        };
        let n = int("n", take("n"))?.ok_or_else(|| fail("missing `n`".into()))? as usize;
        let rows = int("M", take("M"))?.ok_or_else(|| fail("missing `M`".into()))? as usize;
        let seed = int("seed", take("seed"))?;
        if n == 0 {
            return Err(fail("`n` must be at least 1".into()));
        }
        if rows == 0 {
            return Err(fail("`M` must be at least 1".into()));
        }
        let parsed = match kind {
            "classical" => {
                let p1 = match take("p1") {
                    None => 0.5,
                    Some(v) => v.parse::<f64>().map_err(|_| fail(format!("`p1` must be a number, got `{v}`")))?,
                };
                if !(0.0..=1.0).contains(&p1) {
                    return Err(fail(format!("`p1` must lie in [0, 1], got {p1}")));
                }
                GeneratorSpec::Classical { n, rows, p1, seed }
            }
            "cue" => {
                if n > MAX_SAMPLER_QUBITS {
                    return Err(fail(format!("`n` must be at most {MAX_SAMPLER_QUBITS} for CUE sampling")));
                }
                let mode = match take("mode") {
                    None | Some("fixed") => ShotMode::FixedUnitary,
                    Some("fresh") => ShotMode::FreshUnitaryPerShot,
                    Some(other) => return Err(fail(format!("`mode` must be fixed or fresh, got `{other}`"))),
                };
                GeneratorSpec::Cue { n, rows, mode, seed }
            }
            other => return Err(fail(format!("unknown generator `{other}`"))),
        };
        if let Some(k) = fields.keys().next() {
            return Err(fail(format!("unknown key `{k}`")));
        }
        Ok(parsed)
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seed = |s: &Option<u64>| s.map(|s| format!(",seed={s}")).unwrap_or_default();
        match self {
            GeneratorSpec::Classical { n, rows, p1, seed: s } => {
                write!(f, "classical:n={n},M={rows},p1={p1}{}", seed(s))
            }
            GeneratorSpec::Cue { n, rows, mode, seed: s } => {
                let mode = match mode {
                    ShotMode::FixedUnitary => "fixed",
                    ShotMode::FreshUnitaryPerShot => "fresh",
                };
                write!(f, "cue:n={n},M={rows},mode={mode}{}", seed(s))
            }
        }
    }
}

/// Seeds actually used to realize a spec.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedSeeds {
    pub seed: u64,
    /// Seed of the fixed CUE state; absent for other generators.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unitary_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shot_seed: Option<u64>,
}

impl GeneratorSpec {
    pub fn effective_seed(&self, default: u64) -> u64 {
        match self {
            GeneratorSpec::Classical { seed, .. } | GeneratorSpec::Cue { seed, .. } => seed.unwrap_or(default),
        }
    }

    pub fn generate(&self, default_seed: u64) -> Result<(BitArray, GeneratedSeeds), crate::CliError> {
        let seed = self.effective_seed(default_seed);
        match *self {
            GeneratorSpec::Classical { n, rows, p1, .. } => {
                let a = dataset::generate_classical(n, rows, seed, p1)?;
                Ok((a, GeneratedSeeds { seed, unitary_seed: None, shot_seed: None }))
            }
            GeneratorSpec::Cue { n, rows, mode, .. } => {
                let a = haar::sample_cue_bitstrings(n, rows, seed, mode)?;
                let unitary_seed = matches!(mode, ShotMode::FixedUnitary).then_some(seed);
                Ok((a, GeneratedSeeds { seed, unitary_seed, shot_seed: Some(child_seed(seed, 1)) }))
            }
        }
    }
}
