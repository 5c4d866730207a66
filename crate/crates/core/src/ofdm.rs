//! Partial DFT operators and pilot observations for comb-pilot OFDM.
//!
//! `dft_submatrix(K, M)` holds the first `M` columns of the unitary `K`-point
//! DFT, so `FᴴF = I_M`. The pilot operator `pilot_submatrix(K, N, M)` keeps
//! every `K/N`-th row and rescales by `√(K/N)` so it is also an isometry.
//!
//! Observations use the physical pilot-domain channel, which is the plain
//! decimation of `h_K = F_{K,M} h_M`, i.e. `√(N/K)` times the isometric pilot
//! operator. With noise power `σ²` per pilot this makes the non-sparse LS
//! estimator's per-subcarrier error `(M/N)σ²`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel_model::DiscreteChannel;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::rng::SimRng;

/// Pilot magnitudes further than this from one trigger a warning.
pub const PILOT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfig {
    /// Subcarriers (DFT size).
    pub k: usize,
    /// Cyclic prefix length, equal to the channel tap count.
    pub m: usize,
    /// Pilot subcarriers, every `K/N`-th starting at zero.
    pub n: usize,
    /// Pilot symbols; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_values: Option<Vec<Complex64>>,
}

impl OfdmConfig {
    pub fn new(k: usize, m: usize, n: usize) -> Self {
        Self { k, m, n, pilot_values: None }
    }

    /// Checks the structural constraints and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let OfdmConfig { k, m, n, .. } = *self;
        if m == 0 {
            return Err(Error::config("M must be >= 1"));
        }
        if !(k >= n && n >= m) {
            return Err(Error::config(format!("need K >= N >= M, got K={k}, N={n}, M={m}")));
        }
        if k % n != 0 {
            return Err(Error::config(format!("K = {k} is not a multiple of N = {n}")));
        }
        let mut warnings = Vec::new();
        if let Some(x) = &self.pilot_values {
            if x.len() != n {
                return Err(Error::config(format!("{} pilot values for N = {n} pilots", x.len())));
            }
            if x.iter().any(|v| v.norm() == 0.0) {
                return Err(Error::config("pilot values must be nonzero"));
            }
            if let Some((i, v)) =
                x.iter().enumerate().find(|(_, v)| (v.norm() - 1.0).abs() > PILOT_MODULUS_TOL)
            {
                let msg = format!("pilot {i} has modulus {} (not unit amplitude)", v.norm());
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        Ok(warnings)
    }

    pub fn pilots(&self) -> Vec<Complex64> {
        self.pilot_values.clone().unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); self.n])
    }

    /// Spacing `K/N` between pilot subcarriers.
    pub fn comb_step(&self) -> usize {
        self.k / self.n
    }
}

/// First `M` columns of the unitary `K`-point DFT: `exp(−j2πkn/K)/√K`.
pub fn dft_submatrix(k: usize, m: usize) -> Result<CMatrix> {
    if k < m || k == 0 {
        return Err(Error::dimension(format!("DFT size K = {k} smaller than M = {m}")));
    }
    let scale = 1.0 / (k as f64).sqrt();
    Ok(CMatrix::from_fn(k, m, |row, col| {
        // Reduce the phase index first to keep the argument small.
        let idx = (row * col) % k;
        Complex64::from_polar(scale, -2.0 * PI * idx as f64 / k as f64)
    }))
}

/// Rows `0, K/N, 2K/N, …` of [`dft_submatrix`], scaled by `√(K/N)`.
pub fn pilot_submatrix(k: usize, n: usize, m: usize) -> Result<CMatrix> {
    if n == 0 || !k.is_multiple_of(n) {
        return Err(Error::config(format!("K = {k} is not a multiple of N = {n}")));
    }
    if n < m {
        return Err(Error::dimension(format!("N = {n} pilots fewer than M = {m} taps")));
    }
    let step = k / n;
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMatrix::from_fn(n, m, |row, col| {
        let idx = (row * step * col) % k;
        Complex64::from_polar(scale, -2.0 * PI * idx as f64 / k as f64)
    }))
}

/// Map from `h_M` to the noiseless pilot observation:
/// `D(x_N) · √(N/K) · pilot_submatrix(K, N, M)`.
pub fn observation_matrix(config: &OfdmConfig) -> Result<CMatrix> {
    config.validate()?;
    let mut a = pilot_submatrix(config.k, config.n, config.m)?;
    a.scale_mut((config.n as f64 / config.k as f64).sqrt());
    for (mut row, x) in a.row_iter_mut().zip(config.pilots()) {
        row *= x;
    }
    Ok(a)
}

fn check_taps(h: &DiscreteChannel, m: usize) -> Result<()> {
    if h.num_taps() != m {
        return Err(Error::dimension(format!("channel has {} taps, expected M = {m}", h.num_taps())));
    }
    Ok(())
}

/// Frequency response on all `K` subcarriers, `h_K = F_{K,M} h_M`.
pub fn to_frequency(h: &DiscreteChannel, k: usize) -> Result<CVector> {
    Ok(dft_submatrix(k, h.num_taps())? * &h.taps)
}

/// Channel seen on the pilot subcarriers, `h_{N/K}`.
pub fn pilot_channel(h: &DiscreteChannel, config: &OfdmConfig) -> Result<CVector> {
    check_taps(h, config.m)?;
    let mut a = pilot_submatrix(config.k, config.n, config.m)?;
    a.scale_mut((config.n as f64 / config.k as f64).sqrt());
    Ok(a * &h.taps)
}

/// Rebuilds `h_K` from the noiseless pilot-domain channel (`N ≥ M`).
pub fn frequency_from_pilots(h_pilot: &CVector, config: &OfdmConfig) -> Result<CVector> {
    config.validate()?;
    let f_k = dft_submatrix(config.k, config.m)?;
    let f_n = pilot_submatrix(config.k, config.n, config.m)?;
    let h_m = f_n.adjoint() * h_pilot * Complex64::new((config.k as f64 / config.n as f64).sqrt(), 0.0);
    Ok(f_k * h_m)
}

/// Noisy pilot measurement `y_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    pub y: CVector,
    /// `σ²`, total variance per complex coefficient.
    pub noise_variance: f64,
    pub config: OfdmConfig,
}

impl PilotObservation {
    /// Writes `re,im` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re", "im"])?;
        for z in self.y.iter() {
            w.write_record([z.re.to_string(), z.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Circularly-symmetric complex Gaussian vector with `E|z_i|² = sigma2`.
pub fn complex_awgn(len: usize, sigma2: f64, rng: &mut SimRng) -> CVector {
    let s = (sigma2 / 2.0).sqrt();
    CVector::from_fn(len, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(s * re, s * im)
    })
}

/// `y_N = D(x_N) h_{N/K} + z_N`.
pub fn observe(
    h: &DiscreteChannel,
    config: &OfdmConfig,
    sigma2: f64,
    rng: &mut SimRng,
) -> Result<PilotObservation> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::config(format!("noise variance {sigma2} must be >= 0")));
    }
    check_taps(h, config.m)?;
    let a = observation_matrix(config)?;
    let mut y = a * &h.taps;
    if sigma2 > 0.0 {
        y += complex_awgn(config.n, sigma2, rng);
    }
    Ok(PilotObservation { y, noise_variance: sigma2, config: config.clone() })
}
