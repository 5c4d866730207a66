use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel_model::{pulse_matrix, pulse_vector, PulseConfig, DELAY_COLLISION_TOL};
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CMatrix, CVector, IncrementalQr};
use crate::ofdm::{dft_submatrix, observation_matrix, OfdmConfig, PilotObservation};

use super::refine::refine_delay_with_backprojection;
use super::EstimateResult;

/// Residual floor relative to `|y|²`. Only matters when `ξ` is zero
/// (noiseless runs), where rounding keeps the residual from reaching zero.
const NUMERIC_RESIDUAL_FLOOR: f64 = 1e-20;

/// Delay dictionary and stopping rule for OMP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    /// Number of candidate delays `N_T`, spread evenly over `[0, M·T)`.
    pub size: usize,
    /// Binary-search refinement of each selected delay inside its bin.
    #[serde(default)]
    pub refine: bool,
    #[serde(default = "DictionaryConfig::default_refine_iters")]
    pub refine_iters: usize,
    /// Residual power stop threshold `ξ`; `N·σ²` when absent.
    #[serde(default)]
    pub xi: Option<f64>,
    /// Iteration cap; `min(M, N) / 2` when absent.
    #[serde(default)]
    pub max_iters: Option<usize>,
}

impl DictionaryConfig {
    fn default_refine_iters() -> usize {
        10
    }

    /// `N_T = size` without refinement.
    pub fn grid(size: usize) -> Self {
        Self { size, refine: false, refine_iters: Self::default_refine_iters(), xi: None, max_iters: None }
    }

    /// `N_T = size` with binary-search refinement.
    pub fn refined(size: usize) -> Self {
        Self { refine: true, ..Self::grid(size) }
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.size < m {
            return Err(Error::config(format!("dictionary size {} smaller than M = {m}", self.size)));
        }
        if self.refine && self.refine_iters == 0 {
            return Err(Error::config("refine_iters must be >= 1 when refinement is on"));
        }
        if let Some(xi) = self.xi {
            if !(xi >= 0.0 && xi.is_finite()) {
                return Err(Error::config("xi must be >= 0"));
            }
        }
        if let Some(cap) = self.max_iters {
            if cap > n {
                return Err(Error::config(format!("max_iters {cap} exceeds N = {n}")));
            }
        }
        Ok(())
    }

    pub fn effective_max_iters(&self, m: usize, n: usize) -> usize {
        self.max_iters.unwrap_or(m.min(n) / 2)
    }
}

/// Precomputed pilot-domain atoms `v_n = D(x_N) F_{N/K,M} p(n·D_s/N_T)`.
///
/// Immutable once built; one instance can serve any number of observations
/// made with the same OFDM configuration.
#[derive(Debug, Clone)]
pub struct OmpDictionary {
    config: OfdmConfig,
    dict: DictionaryConfig,
    pulse: PulseConfig,
    delays: Vec<f64>,
    bin_width: f64,
    observation: CMatrix,
    atoms: CMatrix,
    f_k: CMatrix,
}

impl OmpDictionary {
    pub fn new(config: &OfdmConfig, pulse: &PulseConfig, dict: &DictionaryConfig) -> Result<Self> {
        dict.validate(config.m, config.n)?;
        if pulse.num_taps != config.m {
            return Err(Error::dimension(format!("pulse has {} taps but M = {}", pulse.num_taps, config.m)));
        }
        // The receiver does not know the realized spread, so the dictionary
        // covers the whole cyclic-prefix window.
        let spread = config.m as f64 * pulse.sample_period_s;
        let bin_width = spread / dict.size as f64;
        let delays: Vec<f64> = (0..dict.size).map(|i| i as f64 * bin_width).collect();
        let observation = observation_matrix(config)?;
        let atoms = &observation * pulse_matrix(pulse, &delays)?;
        Ok(Self {
            config: config.clone(),
            dict: dict.clone(),
            pulse: *pulse,
            delays,
            bin_width,
            observation,
            atoms,
            f_k: dft_submatrix(config.k, config.m)?,
        })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn dictionary_config(&self) -> &DictionaryConfig {
        &self.dict
    }

    /// Runs the pursuit on one observation.
    pub fn estimate(&self, obs: &PilotObservation) -> Result<EstimateResult> {
        let OfdmConfig { k, m, n, .. } = self.config;
        if obs.config.k != k || obs.config.m != m || obs.config.n != n || obs.y.len() != n {
            return Err(Error::dimension(format!(
                "observation (K={}, M={}, N={}) does not match dictionary (K={k}, M={m}, N={n})",
                obs.config.k, obs.config.m, obs.config.n
            )));
        }
        let y = &obs.y;
        let y_power = norm_sqr(y);
        let xi = self.dict.xi.unwrap_or(n as f64 * obs.noise_variance);
        let threshold = xi.max(NUMERIC_RESIDUAL_FLOOR * y_power);
        let max_iters = self.dict.effective_max_iters(m, n);
        let collision = DELAY_COLLISION_TOL * self.pulse.sample_period_s;

        let mut used = vec![false; self.delays.len()];
        let mut qr = IncrementalQr::new(n);
        let mut support: Vec<f64> = Vec::new();
        let mut residual = y.clone();
        let mut trace = vec![y_power];
        let mut warnings = Vec::new();

        'pursuit: while *trace.last().unwrap() > threshold && support.len() < max_iters {
            let corr = self.atoms.ad_mul(&residual);
            let backprojected =
                if self.dict.refine { Some(self.observation.ad_mul(&residual)) } else { None };
            loop {
                // Lowest index wins ties.
                let mut best: Option<(usize, f64)> = None;
                for (i, c) in corr.iter().enumerate() {
                    let v = c.norm_sqr();
                    if !used[i] && best.is_none_or(|(_, b)| v > b) {
                        best = Some((i, v));
                    }
                }
                let Some((idx, _)) = best else {
                    warnings.push(format!("dictionary exhausted after {} atoms", support.len()));
                    break 'pursuit;
                };
                used[idx] = true;
                let (tau, atom) = match &backprojected {
                    Some(u) => {
                        let tau = refine_delay_with_backprojection(
                            self.delays[idx],
                            self.bin_width,
                            u,
                            &self.pulse,
                            self.dict.refine_iters,
                        );
                        if support.iter().any(|s| (s - tau).abs() <= collision) {
                            warnings
                                .push(format!("refined delay {tau:e} s collides with the support; skipped"));
                            continue;
                        }
                        (tau, &self.observation * pulse_vector(&self.pulse, tau))
                    }
                    None => (self.delays[idx], self.atoms.column(idx).clone_owned()),
                };
                match qr.push(&atom) {
                    Ok(()) => {
                        support.push(tau);
                        break;
                    }
                    Err(e) => {
                        log::warn!("skipping atom at {tau:e} s: {e}");
                        warnings.push(format!("atom at {tau:e} s skipped: {e}"));
                    }
                }
            }
            residual = y - qr.project(y);
            trace.push(norm_sqr(&residual));
        }

        let truncated = *trace.last().unwrap() > threshold && support.len() >= max_iters;
        let gains = qr.solve(y);
        let h_k = if support.is_empty() {
            CVector::zeros(k)
        } else {
            let p = pulse_matrix(&self.pulse, &support)?;
            &self.f_k * (p * CVector::from_column_slice(&gains))
        };
        Ok(EstimateResult {
            h_k_hat: h_k.iter().copied().collect(),
            iterations: support.len(),
            recovered_delays: support,
            amplitudes_hat: gains.into_iter().collect::<Vec<Complex64>>(),
            residual_trace: trace,
            truncated,
            warnings,
        })
    }
}

/// One-shot OMP estimate; builds the dictionary for this observation.
pub fn omp(
    obs: &PilotObservation,
    dict: &DictionaryConfig,
    pulse: &PulseConfig,
    k: usize,
) -> Result<EstimateResult> {
    let config = OfdmConfig { k, ..obs.config.clone() };
    OmpDictionary::new(&config, pulse, dict)?.estimate(obs)
}
