//! Deep generative imputation for missing-not-at-random tabular data.
//!
//! The crate is organised bottom-up:
//!
//! - [`autodiff`]: a small reverse-mode differentiation engine over dense
//!   2-D tensors, with the layer, likelihood and optimizer primitives the
//!   models need.
//! - [`missing`]: masks, incomplete matrices and the observed/missing
//!   composition algebra, plus standardization and zero filling.
//! - [`synth`]: seeded synthetic Gaussian data and MCAR / self-masking /
//!   star / mixed missingness generators.
//! - [`gnr`]: the conjunction model with parallel data and mask decoders,
//!   its importance-weighted bound, training and imputation.
//! - [`baselines`]: mean imputation, the alpha = 0 degeneracy and a serial
//!   selection-model variant.
//! - [`eval`]: metrics, the rating transform and the multi-seed experiment
//!   runner.
//! - [`io`]: CSV / triplet ingestion, flat config files, checkpoints and
//!   report persistence.

pub mod autodiff;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod gnr;
pub mod io;
pub mod missing;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
