//! Channel estimators: non-sparse LS/ML, genie-aided sparse LS/ML, and OMP
//! with optional overcomplete dictionary and binary-search delay refinement.

mod ml;
mod omp;
mod refine;

pub use ml::{ml_full, ml_genie, GenieEstimator, MlFullEstimator};
pub use omp::{omp, DictionaryConfig, OmpDictionary};
pub use refine::{refine_delay, refine_delay_with_backprojection};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Output of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    /// Estimated channel on all `K` subcarriers.
    pub h_k_hat: Vec<Complex64>,
    /// Support delays in seconds (empty for the non-sparse estimator).
    pub recovered_delays: Vec<f64>,
    /// Gains of the recovered support, or the tap estimates for the
    /// non-sparse estimator.
    pub amplitudes_hat: Vec<Complex64>,
    /// Number of recovered components `L̂`.
    pub iterations: usize,
    /// `|r_i|²` for `i = 0..=iterations`; `r_0 = y_N`.
    pub residual_trace: Vec<f64>,
    /// The iteration cap stopped the pursuit before the residual threshold.
    #[serde(default)]
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// High-SNR error variance of OMP stopped at `ξ = Nσ²`: `2 E[L̂] σ² / N`.
pub fn omp_variance_bound(expected_l_hat: f64, n: usize, sigma2: f64) -> f64 {
    2.0 * expected_l_hat * sigma2 / n as f64
}

/// Error variance of the non-sparse estimator with unit pilots, `(M/N)σ²`.
pub fn ml_full_variance(m: usize, n: usize, sigma2: f64) -> f64 {
    m as f64 * sigma2 / n as f64
}

/// Error variance of the genie-aided estimator, `(L/N)σ²`.
pub fn ml_genie_variance(l: f64, n: usize, sigma2: f64) -> f64 {
    l * sigma2 / n as f64
}
