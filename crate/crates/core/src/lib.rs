//! Randomness audit of bit-string samples produced by random quantum circuits.
//!
//! The crate reads measurement files (one bit-string per line), generates
//! classical and Haar-random (CUE) reference samples, and runs the analysis
//! battery over them:
//!
//! - [`dataset`]: the `M × n` bit-array model, file parsing, histograms.
//! - [`haar`]: CUE unitary sampling, the eigenvector density, linear XEB.
//! - [`ensembles`]: heat maps, Ginibre circle-law and Wishart spectra.
//! - [`nist`]: an SP 800-22 style statistical test battery.
//! - [`transport`]: Wasserstein-1 distances and a 2-D embedding of them.
//!
//! All randomness is derived from explicit `u64` seeds through [`rng`], so
//! every result is reproducible bit-for-bit.

pub mod dataset;
pub mod ensembles;
pub mod haar;
pub mod nist;
pub mod rng;
pub mod stats;
pub mod transport;

pub use dataset::{BitArray, OutcomeHistogram, Pattern, SampleMeta, Source};
pub use haar::{ShotMode, UnitarySample};


pub use nist::{BitStream, TestId, TestReport, Verdict};
pub use transport::{DistanceMatrix, LabeledSample};
