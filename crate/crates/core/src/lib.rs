//! Sparse OFDM channel estimation.
//!
//! Random sparse multipath channels ([`channel_model`]) are observed through
//! comb pilots ([`ofdm`]) and estimated with non-sparse LS/ML, genie-aided
//! sparse LS/ML, or orthogonal matching pursuit with optional binary-search
//! delay refinement ([`estimators`]). [`analysis`] scores channel
//! compressibility with the power fairness index, and [`experiments`] runs
//! the Monte Carlo sweeps behind the command-line tool.

// `!(x > 0.0)` is used on purpose to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel_model;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod ofdm;
pub mod rng;

pub use error::{Error, Result};
