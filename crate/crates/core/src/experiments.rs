//! Monte Carlo harness: SNR sweeps of the estimators and ensemble
//! compressibility curves, with CSV/JSON output.
//!
//! Every trial draws from its own random stream addressed by
//! `(master_seed, purpose, trial, snr_index)`, and results are merged in
//! trial order, so output does not depend on how trials are scheduled.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{compressibility_profile, error_variance, fi_step_assumption_check};
use crate::channel_model::{
    sample_channel, ChannelGenConfig, DiscreteChannel, DistributionKind, PulseConfig,
};
use crate::error::{Error, Result};
use crate::estimators::{
    ml_full_variance, ml_genie_variance, omp_variance_bound, DictionaryConfig, EstimateResult,
    GenieEstimator, MlFullEstimator, OmpDictionary,
};
use crate::ofdm::{observe, to_frequency, OfdmConfig};
use crate::rng::{derive_rng, purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    MlFull,
    MlGenie,
    Omp { label: String, dictionary: DictionaryConfig },
}

impl EstimatorSpec {
    pub fn id(&self) -> &str {
        match self {
            EstimatorSpec::MlFull => "ml_full",
            EstimatorSpec::MlGenie => "ml_genie",
            EstimatorSpec::Omp { label, .. } => label,
        }
    }

    /// `ml_full`, `ml_genie`, and OMP with `N_T = M`, `N_T = 4M` and
    /// binary-search refinement on `N_T = M`.
    pub fn standard_set(m: usize) -> Vec<EstimatorSpec> {
        vec![
            EstimatorSpec::MlFull,
            EstimatorSpec::MlGenie,
            EstimatorSpec::Omp { label: "omp_nt1".into(), dictionary: DictionaryConfig::grid(m) },
            EstimatorSpec::Omp { label: "omp_nt4".into(), dictionary: DictionaryConfig::grid(4 * m) },
            EstimatorSpec::Omp { label: "ompbr".into(), dictionary: DictionaryConfig::refined(m) },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// K=512, M=N=128, T=2.5 ns, 10³ trials.
    Full,
    /// K=64, M=N=16, 100 trials.
    Small,
}

/// Complete description of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ofdm: OfdmConfig,
    pub channel: ChannelGenConfig,
    pub pulse: PulseConfig,
    pub estimators: Vec<EstimatorSpec>,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    /// SNR used for the `d·σ²/N` reference line of the compressibility curves.
    #[serde(default = "RunConfig::default_cost_snr_db")]
    pub rho_cost_snr_db: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Full)
    }
}

impl RunConfig {
    fn default_cost_snr_db() -> f64 {
        20.0
    }

    pub fn preset(preset: Preset) -> Self {
        let (k, m, trials) = match preset {
            Preset::Full => (512, 128, 1000),
            Preset::Small => (64, 16, 100),
        };
        let t = 2.5e-9;
        let channel = match preset {
            Preset::Full => ChannelGenConfig::default(),
            // Same amplitude model squeezed into the shorter window.
            Preset::Small => ChannelGenConfig {
                l_mean: 4.0,
                delay_spread_s: m as f64 * t,
                gamma_decay_s: 60e-9 * m as f64 / 128.0,
                intra_cluster_rate: Some(1.0 / (20e-9 * m as f64 / 128.0)),
                cluster_count_mean: Some(2.0),
                ..ChannelGenConfig::default()
            },
        };
        Self {
            ofdm: OfdmConfig::new(k, m, m),
            channel,
            pulse: PulseConfig::sinc(t, m),
            estimators: EstimatorSpec::standard_set(m),
            snr_grid_db: snr_range(-10.0, 2.5, 30.0),
            trials,
            master_seed: 1,
            output_path: None,
            rho_cost_snr_db: Self::default_cost_snr_db(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.ofdm.validate()? {
            log::warn!("{w}");
        }
        self.pulse.validate()?;
        if self.pulse.num_taps != self.ofdm.m {
            return Err(Error::config(format!(
                "pulse.num_taps = {} differs from ofdm.m = {}",
                self.pulse.num_taps, self.ofdm.m
            )));
        }
        self.channel.validate(self.ofdm.m)?;
        if self.trials == 0 {
            return Err(Error::config("trials must be >= 1"));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("snr grid must be a nonempty list of finite values"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("no estimators configured"));
        }
        let mut ids: Vec<&str> = self.estimators.iter().map(EstimatorSpec::id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("estimator ids must be unique"));
        }
        for e in &self.estimators {
            match e {
                EstimatorSpec::Omp { dictionary, .. } => dictionary.validate(self.ofdm.m, self.ofdm.n)?,
                EstimatorSpec::MlFull if self.ofdm.n < self.ofdm.m => {
                    return Err(Error::config(format!(
                        "ml_full needs N >= M (N = {}, M = {})",
                        self.ofdm.n, self.ofdm.m
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// `start, start + step, …` up to and including `stop` (within rounding).
pub fn snr_range(start: f64, step: f64, stop: f64) -> Vec<f64> {
    if step <= 0.0 || stop < start {
        return vec![start];
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + step * i as f64).collect()
}

/// Parses `"start:step:stop"` or a single value.
pub fn parse_snr_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::config(format!("bad SNR value `{s}`")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step <= 0.0 || stop < start {
                return Err(Error::config(format!("empty SNR range `{spec}`")));
            }
            Ok(snr_range(start, step, stop))
        }
        _ => Err(Error::config(format!("SNR grid `{spec}` is not start:step:stop"))),
    }
}

pub fn snr_db_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub snr_db: f64,
    pub estimator: String,
    pub mean_mse: f64,
    pub mse_stderr: f64,
    pub mean_l_hat: f64,
    pub std_l_hat: f64,
    pub theory_bound: f64,
    pub failed_trials: usize,
}

pub const SWEEP_CSV_HEADER: [&str; 8] = [
    "snr_db",
    "estimator",
    "mean_mse",
    "mse_stderr",
    "mean_L_hat",
    "std_L_hat",
    "theory_bound",
    "failed_trials",
];

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.snr_db.to_string(),
            r.estimator.clone(),
            r.mean_mse.to_string(),
            r.mse_stderr.to_string(),
            r.mean_l_hat.to_string(),
            r.std_l_hat.to_string(),
            r.theory_bound.to_string(),
            r.failed_trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Estimators prepared once per run and shared by all trials.
enum Prepared {
    MlFull(MlFullEstimator),
    MlGenie,
    Omp(OmpDictionary),
}

/// Delays the genie is told about: the true component delays, or the
/// nonzero tap positions for tap-domain channels.
fn genie_delays(h: &DiscreteChannel) -> Vec<f64> {
    match &h.source {
        Some(mpcs) => mpcs.delays.clone(),
        None => h
            .taps
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(n, _)| n as f64 * h.pulse.sample_period_s)
            .collect(),
    }
}

type Cell = Option<(f64, f64)>;

struct TrialOutcome {
    // cells[snr][estimator] = (mse, L̂)
    cells: Vec<Vec<Cell>>,
}

fn run_trial(config: &RunConfig, prepared: &[Prepared], trial: usize) -> TrialOutcome {
    let n_snr = config.snr_grid_db.len();
    let failed = || TrialOutcome { cells: vec![vec![None; prepared.len()]; n_snr] };
    let mut rng = derive_rng(config.master_seed, &[purpose::CHANNEL, trial as u64]);
    let channel = match sample_channel(&config.channel, &config.pulse, &mut rng) {
        Ok(h) => h,
        Err(e) => {
            log::warn!("trial {trial}: channel draw failed: {e}");
            return failed();
        }
    };
    let Ok(h_k) = to_frequency(&channel, config.ofdm.k) else {
        return failed();
    };
    let h_k: Vec<Complex64> = h_k.iter().copied().collect();
    let genie = if prepared.iter().any(|p| matches!(p, Prepared::MlGenie)) {
        match GenieEstimator::new(&config.ofdm, &genie_delays(&channel), &config.pulse) {
            Ok(g) => Some(g),
            Err(e) => {
                log::warn!("trial {trial}: genie unavailable: {e}");
                None
            }
        }
    } else {
        None
    };

    let cells = config
        .snr_grid_db
        .iter()
        .enumerate()
        .map(|(si, &snr)| {
            let sigma2 = snr_db_to_sigma2(snr);
            let mut rng = derive_rng(config.master_seed, &[purpose::NOISE, trial as u64, si as u64]);
            let obs = match observe(&channel, &config.ofdm, sigma2, &mut rng) {
                Ok(o) => o,
                Err(_) => return vec![None; prepared.len()],
            };
            prepared
                .iter()
                .map(|p| {
                    let result: Result<EstimateResult> = match p {
                        Prepared::MlFull(est) => est.estimate(&obs),
                        Prepared::MlGenie => match &genie {
                            Some(g) => g.estimate(&obs),
                            None => Err(Error::DegenerateDictionary("genie unavailable".into())),
                        },
                        Prepared::Omp(dict) => dict.estimate(&obs),
                    };
                    result.and_then(|r| Ok((error_variance(&h_k, &r.h_k_hat)?, r.iterations as f64))).ok()
                })
                .collect()
        })
        .collect();
    TrialOutcome { cells }
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs every estimator over `trials` channel draws at each SNR point.
///
/// Rows are ordered by SNR, then by estimator in configuration order.
pub fn run_snr_sweep(config: &RunConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let prepared: Vec<Prepared> = config
        .estimators
        .iter()
        .map(|spec| {
            Ok(match spec {
                EstimatorSpec::MlFull => Prepared::MlFull(MlFullEstimator::new(&config.ofdm)?),
                EstimatorSpec::MlGenie => Prepared::MlGenie,
                EstimatorSpec::Omp { dictionary, .. } => {
                    Prepared::Omp(OmpDictionary::new(&config.ofdm, &config.pulse, dictionary)?)
                }
            })
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<TrialOutcome> =
        (0..config.trials).into_par_iter().map(|t| run_trial(config, &prepared, t)).collect();

    let (m, n) = (config.ofdm.m, config.ofdm.n);
    let mut records = Vec::new();
    for (si, &snr_db) in config.snr_grid_db.iter().enumerate() {
        let sigma2 = snr_db_to_sigma2(snr_db);
        for (ei, spec) in config.estimators.iter().enumerate() {
            let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.cells[si][ei]).collect();
            let failed_trials = config.trials - ok.len();
            let mses: Vec<f64> = ok.iter().map(|c| c.0).collect();
            let l_hats: Vec<f64> = ok.iter().map(|c| c.1).collect();
            let (mean_mse, std_mse) = mean_and_std(&mses);
            let (mean_l_hat, std_l_hat) = mean_and_std(&l_hats);
            let theory_bound = match spec {
                EstimatorSpec::MlFull => ml_full_variance(m, n, sigma2),
                EstimatorSpec::MlGenie => ml_genie_variance(mean_l_hat, n, sigma2),
                EstimatorSpec::Omp { .. } => omp_variance_bound(mean_l_hat, n, sigma2),
            };
            records.push(SweepRecord {
                snr_db,
                estimator: spec.id().to_string(),
                mean_mse,
                mse_stderr: std_mse / (mses.len().max(1) as f64).sqrt(),
                mean_l_hat,
                std_l_hat,
                theory_bound,
                failed_trials,
            });
        }
    }
    Ok(records)
}

/// Ensemble-average compressibility curves for one generator at one `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoRow {
    pub generator: String,
    pub d: usize,
    pub rho_bar_mean: f64,
    /// Mean of the per-realization FI product lower bound.
    pub lb_fi: f64,
    /// Mean of the per-realization FI product upper bound.
    pub ub_fi: f64,
    /// Mean of the per-realization geometric approximation.
    pub lb_geometric: f64,
    /// `d·σ²/N` at the configured reference SNR.
    pub cost_line: f64,
    /// Product lower bound evaluated on the ensemble-mean `FI(R_i)`.
    pub lb_fi_of_mean: f64,
    /// Geometric approximation evaluated on the ensemble-mean `FI(h_M)`.
    pub lb_geometric_of_mean: f64,
}

/// Per-generator diagnostics of a compressibility comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorSummary {
    pub generator: String,
    pub realizations: usize,
    pub mean_fi: f64,
    pub mean_support: f64,
    /// Realization/`d` pairs where the product bounds fail to sandwich `ρ̄(d)`.
    pub sandwich_violations: usize,
    /// Fraction of `(realization, d ≤ assumption_depth)` pairs where removing
    /// the strongest tap raised the FI by at least `(M−d+1)/(M−d)`.
    pub fi_step_fraction: f64,
    pub assumption_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoComparison {
    pub rows: Vec<RhoRow>,
    pub summaries: Vec<GeneratorSummary>,
}

pub const RHO_CSV_HEADER: [&str; 7] =
    ["generator", "d", "rho_bar_mean", "lb_fi", "ub_fi", "lb_geometric", "cost_line"];

pub fn write_rho_csv<W: Write>(rows: &[RhoRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RHO_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.generator.clone(),
            r.d.to_string(),
            r.rho_bar_mean.to_string(),
            r.lb_fi.to_string(),
            r.ub_fi.to_string(),
            r.lb_geometric.to_string(),
            r.cost_line.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Relative slack allowed when counting sandwich violations.
const SANDWICH_TOL: f64 = 1e-12;

/// Depth up to which the FI step assumption is tallied.
pub const ASSUMPTION_DEPTH: usize = 10;

/// Averages `ρ̄(d)` and its FI bounds over `config.trials` draws from each
/// generator. Bounds that stop early because the residual set is empty are
/// counted as zero, matching `ρ̄` there.
pub fn run_rho_comparison(
    config: &RunConfig,
    generators: &[DistributionKind],
    d_max: usize,
) -> Result<RhoComparison> {
    config.validate()?;
    if generators.is_empty() {
        return Err(Error::config("no generators given"));
    }
    let m = config.ofdm.m;
    let k = config.ofdm.k;
    if d_max > m {
        return Err(Error::config(format!("d_max = {d_max} exceeds M = {m}")));
    }
    let depth = ASSUMPTION_DEPTH.min(m.saturating_sub(1));
    let sigma2 = snr_db_to_sigma2(config.rho_cost_snr_db);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();

    for (gi, &kind) in generators.iter().enumerate() {
        let channel_cfg = ChannelGenConfig { distribution_kind: kind, ..config.channel.clone() };
        let per_trial: Vec<Result<_>> = (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = derive_rng(config.master_seed, &[purpose::ANALYSIS, gi as u64, t as u64]);
                let h = sample_channel(&channel_cfg, &config.pulse, &mut rng)?;
                let support = h.taps.iter().filter(|z| z.norm() > 0.0).count();
                let profile = compressibility_profile(h.taps.as_slice(), k)?;
                let step = fi_step_assumption_check(&h, depth)?;
                Ok((profile, step, support))
            })
            .collect();

        let count = per_trial.len() as f64;
        let mut rho = vec![0.0; m + 1];
        let mut lb = vec![0.0; m + 1];
        let mut ub = vec![0.0; m + 1];
        let mut geo = vec![0.0; m + 1];
        let mut fi_res = vec![0.0; m];
        let mut fi_sum = 0.0;
        let mut support_sum = 0.0;
        let mut violations = 0;
        let mut step_hits = 0;
        let mut step_total = 0;
        for item in per_trial {
            let (p, step, support) = item?;
            fi_sum += p.fi_full;
            support_sum += support as f64;
            for d in 0..=m {
                rho[d] += p.rho_bar[d];
                lb[d] += p.bound_lower_fi.get(d).copied().unwrap_or(0.0);
                ub[d] += p.bound_upper_fi.get(d).copied().unwrap_or(0.0);
                geo[d] += p.bound_geometric[d];
                if let (Some(&lo), Some(&hi)) = (p.bound_lower_fi.get(d), p.bound_upper_fi.get(d)) {
                    let slack = SANDWICH_TOL * p.rho_bar[0];
                    if lo > p.rho_bar[d] + slack || p.rho_bar[d] > hi + slack {
                        violations += 1;
                    }
                }
            }
            for (acc, fi) in fi_res.iter_mut().zip(&p.fi_residuals) {
                *acc += fi;
            }
            step_hits += step.holds_count();
            step_total += depth;
        }
        let mean_fi = fi_sum / count;
        let mut lb_of_mean = vec![1.0 / k as f64];
        for i in 0..m {
            let fi = fi_res[i] / count;
            let factor = if fi > 0.0 { (1.0 - 1.0 / ((m - i) as f64 * fi).sqrt()).max(0.0) } else { 0.0 };
            lb_of_mean.push(lb_of_mean[i] * factor);
        }
        for d in 0..=d_max {
            rows.push(RhoRow {
                generator: kind.name().to_string(),
                d,
                rho_bar_mean: rho[d] / count,
                lb_fi: lb[d] / count,
                ub_fi: ub[d] / count,
                lb_geometric: geo[d] / count,
                cost_line: d as f64 * sigma2 / config.ofdm.n as f64,
                lb_fi_of_mean: lb_of_mean[d],
                lb_geometric_of_mean: crate::analysis::geometric_bound(mean_fi, m, d, k),
            });
        }
        summaries.push(GeneratorSummary {
            generator: kind.name().to_string(),
            realizations: config.trials,
            mean_fi,
            mean_support: support_sum / count,
            sandwich_violations: violations,
            fi_step_fraction: if step_total > 0 { step_hits as f64 / step_total as f64 } else { f64::NAN },
            assumption_depth: depth,
        });
    }
    Ok(RhoComparison { rows, summaries })
}
