use num_complex::Complex64;

use crate::channel_model::{pulse_matrix, PulseConfig};
use crate::error::{Error, Result};
use crate::linalg::{left_pinv, CMatrix};
use crate::ofdm::{dft_submatrix, observation_matrix, OfdmConfig, PilotObservation};

use super::EstimateResult;

fn check_observation(obs: &PilotObservation, config: &OfdmConfig) -> Result<()> {
    if obs.config.k != config.k || obs.config.n != config.n || obs.config.m != config.m {
        return Err(Error::dimension(format!(
            "observation made with K={}, N={}, M={} but estimator built for K={}, N={}, M={}",
            obs.config.k, obs.config.n, obs.config.m, config.k, config.n, config.m
        )));
    }
    if obs.y.len() != config.n {
        return Err(Error::dimension(format!("{} pilot samples for N = {}", obs.y.len(), config.n)));
    }
    Ok(())
}

/// Non-sparse LS estimator `ĥ_M = (D(x_N) F_{N/K,M})⁺ y_N`, `ĥ_K = F_{K,M} ĥ_M`.
///
/// The pseudoinverse is computed once and reused across observations.
#[derive(Debug, Clone)]
pub struct MlFullEstimator {
    config: OfdmConfig,
    pinv: CMatrix,
    f_k: CMatrix,
}

impl MlFullEstimator {
    pub fn new(config: &OfdmConfig) -> Result<Self> {
        if config.n < config.m {
            return Err(Error::Underdetermined { rows: config.n, cols: config.m });
        }
        let a = observation_matrix(config)?;
        Ok(Self { config: config.clone(), pinv: left_pinv(&a)?, f_k: dft_submatrix(config.k, config.m)? })
    }

    pub fn estimate(&self, obs: &PilotObservation) -> Result<EstimateResult> {
        check_observation(obs, &self.config)?;
        let h_m = &self.pinv * &obs.y;
        let h_k = &self.f_k * &h_m;
        Ok(EstimateResult {
            h_k_hat: h_k.iter().copied().collect(),
            recovered_delays: Vec::new(),
            amplitudes_hat: h_m.iter().copied().collect(),
            iterations: self.config.m,
            residual_trace: Vec::new(),
            truncated: false,
            warnings: Vec::new(),
        })
    }
}

/// One-shot non-sparse LS estimate for an observation with `K` subcarriers
/// and `M` taps.
pub fn ml_full(obs: &PilotObservation, k: usize, m: usize) -> Result<EstimateResult> {
    let n = obs.y.len();
    if n < m {
        return Err(Error::Underdetermined { rows: n, cols: m });
    }
    let config = OfdmConfig { k, m, ..obs.config.clone() };
    MlFullEstimator::new(&config)?.estimate(obs)
}

/// LS estimator of the component gains given the true delays,
/// `â = (D(x_N) F_{N/K,M} P_τ)⁺ y_N`, `ĥ_K = F_{K,M} P_τ â`.
#[derive(Debug, Clone)]
pub struct GenieEstimator {
    config: OfdmConfig,
    delays: Vec<f64>,
    pinv: CMatrix,
    reconstruct: CMatrix,
}

impl GenieEstimator {
    pub fn new(config: &OfdmConfig, delays: &[f64], pulse: &PulseConfig) -> Result<Self> {
        if pulse.num_taps != config.m {
            return Err(Error::dimension(format!("pulse has {} taps but M = {}", pulse.num_taps, config.m)));
        }
        if delays.len() > config.n {
            return Err(Error::Underdetermined { rows: config.n, cols: delays.len() });
        }
        let p = pulse_matrix(pulse, delays)?;
        let a = observation_matrix(config)? * &p;
        let pinv = left_pinv(&a)?;
        let reconstruct = dft_submatrix(config.k, config.m)? * p;
        Ok(Self { config: config.clone(), delays: delays.to_vec(), pinv, reconstruct })
    }

    pub fn estimate(&self, obs: &PilotObservation) -> Result<EstimateResult> {
        check_observation(obs, &self.config)?;
        let gains = &self.pinv * &obs.y;
        let h_k = &self.reconstruct * &gains;
        Ok(EstimateResult {
            h_k_hat: h_k.iter().copied().collect(),
            recovered_delays: self.delays.clone(),
            amplitudes_hat: gains.iter().copied().collect::<Vec<Complex64>>(),
            iterations: self.delays.len(),
            residual_trace: Vec::new(),
            truncated: false,
            warnings: Vec::new(),
        })
    }
}

/// One-shot genie-aided estimate.
pub fn ml_genie(
    obs: &PilotObservation,
    true_delays: &[f64],
    pulse: &PulseConfig,
    k: usize,
) -> Result<EstimateResult> {
    let config = OfdmConfig { k, ..obs.config.clone() };
    GenieEstimator::new(&config, true_delays, pulse)?.estimate(obs)
}
