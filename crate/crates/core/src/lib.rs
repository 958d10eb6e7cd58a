//! Spectral engineering of high-gain parametric down-conversion in a
//! two-crystal SU(1,1) interferometer with a dispersive gap.
//!
//! The pipeline runs joint spectral amplitude → Schmidt decomposition →
//! high-gain reweighting → spectra, mode numbers and `g²`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dispersion;
pub mod error;
pub mod jsa;
pub mod modes;
pub mod observables;
pub mod scenarios;

pub use error::{Error, Result};
