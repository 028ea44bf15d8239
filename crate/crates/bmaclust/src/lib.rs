//! Parsimonious Gaussian mixture sweeps with BIC-weighted model averaging.
//!
//! `bmaclust` fits finite normal mixtures under the ten volume/shape/
//! orientation covariance constraints (EII through VVV) over a grid of
//! component counts, converts the fitted grid into approximate posterior
//! model probabilities through BIC, and then works with the whole weighted
//! ensemble instead of a single winner:
//!
//! * consensus matrices of pairwise co-clustering probabilities, averaged
//!   across models ([`consensus`]);
//! * complete-linkage dendrograms over those probabilities, whose cut level
//!   is itself a probability guarantee ([`consensus::complete_linkage`],
//!   [`consensus::cut`]);
//! * model-averaged density estimates with a kernel-density baseline and
//!   integrated-squared-error / Kullback-Leibler benchmarking ([`density`],
//!   [`evaluate`]);
//! * a simulation catalog of benchmark mixtures with reproducible
//!   counter-based sampling ([`simgen`], [`rng`]).
//!
//! The `examples/` directory has one runnable program per capability; the
//! `bmaclust` binary wires the same library calls into a batch CLI.

pub mod consensus;
pub mod cov;
pub mod data;
pub mod datasets;
pub mod density;
pub mod em;
pub mod error;
pub mod evaluate;
mod hclust;
pub mod mixture;
pub mod numeric;
pub mod params;
pub mod rng;
pub mod selection;
pub mod simgen;

pub mod bench;
pub mod commands;
pub mod manifest;
pub mod zstore;

pub use cov::CovarianceSpec;
pub use data::DataMatrix;
pub use em::{fit, FitConfig, FittedModel, InitStrategy};
pub use error::{Error, Result};
pub use params::{MixtureParams, ResponsibilityMatrix};
pub use selection::{sweep, ModelEnsemble, ModelGrid};
