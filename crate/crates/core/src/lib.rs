//! Compressive target and anomaly detection.
//!
//! Signals observed through a small number of noisy linear projections,
//! contaminated by a colored Gaussian background, are classified against a
//! known dictionary (dictionary signal detection) or flagged as anomalous
//! with false-discovery-rate control (anomalous signal detection). Neither
//! path reconstructs the underlying signal.
//!
//! Module map:
//!
//! - [`numerics`]: symmetric matrix roots, spectral norms, noncentral
//!   chi-squared distribution, reproducible random streams.
//! - [`model`]: dictionaries, backgrounds, scenes and synthetic data.
//! - [`sensing`]: sensing matrix construction and the whitening filter.
//! - [`dsd`]: MAP classification, empirical pFDR and performance bounds.
//! - [`asd`]: anomaly statistics, p-value bounds and Benjamini-Hochberg.
//! - [`baselines`]: downsampled MAP and GLRT comparators.
//! - [`config`], [`experiment`], [`report`]: the Monte Carlo harness used by
//!   the `compdet` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asd;
pub mod baselines;
pub mod config;
pub mod dsd;
mod error;
pub mod experiment;
pub mod model;
pub mod numerics;
pub mod report;
pub mod sensing;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream, SymMatrix, Vector};
