//! Divide-and-conquer kernel ridge regression with bootstrap confidence bands.
//!
//! The sample is split into `P` disjoint partitions, a kernel ridge regressor
//! is fitted on each, and the local predictions on a fixed prediction set are
//! averaged. Resampling the `P` local prediction vectors (rather than the raw
//! data) gives a bootstrap law for the averaged estimator, from which
//! simultaneous element-wise bands with equal per-component tail mass are
//! calibrated.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernel`] | Matérn kernels, Gram matrices, synthetic spectral model |
//! | [`krr`] | Kernel ridge regression on one partition |
//! | [`dnc`] | Partitioning, parallel local fits, averaging |
//! | [`bootstrap`] | Empirical and multiplier bootstrap replicates |
//! | [`bands`] | Rank-transform calibration of simultaneous bands |
//! | [`simulation`] | Synthetic coverage study and sup-norm rate study |
//! | [`diagnostics`] | Numerical checks on the spectral model |
//! | [`export`] | CSV writers |

pub mod bands;
pub mod bootstrap;
pub mod diagnostics;
pub mod dnc;
mod error;
mod exec;
pub mod export;
pub mod kernel;
pub mod krr;
pub mod points;
pub mod seed;
pub mod simulation;

pub use error::{Error, Result};
pub use points::{Points, PredictionSet, Sample};
