//! Random sparse multipath channels and their discrete equivalent.
//!
//! A physical channel is a set of multipath components (delay, amplitude,
//! phase). Sampling it through a transmit pulse at period `T` over `M` taps
//! gives the discrete equivalent channel `h_M[n] = Σ α e^{jφ} p(nT − τ)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CMatrix, CVector};
use crate::rng::SimRng;

/// Redraw budget for [`sample_mpcs`] before giving up.
pub const MAX_REDRAWS: usize = 100;

/// Standard deviation in natural-log amplitude units of a lognormal whose
/// power spread is `db` decibels.
pub fn db_to_log_amplitude_std(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    MmwaveLognormal,
    BernoulliGaussian,
    BernoulliLognormal,
    DenseGaussian,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 4] = [
        DistributionKind::MmwaveLognormal,
        DistributionKind::BernoulliLognormal,
        DistributionKind::BernoulliGaussian,
        DistributionKind::DenseGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::MmwaveLognormal => "mmwave_lognormal",
            DistributionKind::BernoulliGaussian => "bernoulli_gaussian",
            DistributionKind::BernoulliLognormal => "bernoulli_lognormal",
            DistributionKind::DenseGaussian => "dense_gaussian",
        }
    }
}

impl std::str::FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown distribution kind `{s}`")))
    }
}

/// Parameters of the random channel generator. Serialized as a flat JSON
/// object.
///
/// The defaults for `gamma_decay_s`, `sigma_alpha` and the cluster
/// parameters are placeholders chosen to give a heavy-tailed delay profile
/// with 28 components on average; they are not taken from a measurement
/// campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelGenConfig {
    /// Expected number of multipath components.
    pub l_mean: f64,
    /// Delay spread `D_s` in seconds; arrivals are confined to `[0, D_s]`.
    pub delay_spread_s: f64,
    /// Power-decay constant `Γ` in seconds (`log ᾱ = −τ/Γ + ζ`).
    pub gamma_decay_s: f64,
    /// Standard deviation of the per-path shadowing `ζ`, natural-log units.
    pub sigma_alpha: f64,
    /// Total received power `Σ α²`.
    pub p_recv: f64,
    /// Carrier frequency in Hz. Metadata only.
    pub carrier_fc_hz: f64,
    /// Mean number of clusters. `None` gives a homogeneous Poisson process.
    pub cluster_count_mean: Option<f64>,
    /// Decay rate (1/s) of the intra-cluster arrival density.
    pub intra_cluster_rate: Option<f64>,
    /// Standard deviation of the per-cluster shadowing, natural-log units.
    pub cluster_sigma: f64,
    pub distribution_kind: DistributionKind,
    /// Log-amplitude standard deviation for the Bernoulli-lognormal generator.
    pub comparison_sigma_log: f64,
}

impl Default for ChannelGenConfig {
    fn default() -> Self {
        Self {
            l_mean: 28.0,
            delay_spread_s: 320e-9,
            gamma_decay_s: 60e-9,
            sigma_alpha: db_to_log_amplitude_std(4.0),
            p_recv: 1.0,
            carrier_fc_hz: 28e9,
            cluster_count_mean: Some(4.0),
            intra_cluster_rate: Some(1.0 / 20e-9),
            cluster_sigma: db_to_log_amplitude_std(3.0),
            distribution_kind: DistributionKind::MmwaveLognormal,
            comparison_sigma_log: 1.5,
        }
    }
}

impl ChannelGenConfig {
    /// Homogeneous (unclustered) arrivals with the same amplitude model.
    pub fn unclustered(self) -> Self {
        Self { cluster_count_mean: None, intra_cluster_rate: None, ..self }
    }

    pub fn validate(&self, num_taps: usize) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.delay_spread_s) {
            return Err(Error::config("delay_spread_s must be > 0"));
        }
        if !(self.gamma_decay_s > 0.0) {
            return Err(Error::config("gamma_decay_s must be > 0"));
        }
        if !(self.sigma_alpha >= 0.0 && self.sigma_alpha.is_finite()) {
            return Err(Error::config("sigma_alpha must be >= 0"));
        }
        if !(self.cluster_sigma >= 0.0 && self.cluster_sigma.is_finite()) {
            return Err(Error::config("cluster_sigma must be >= 0"));
        }
        if !(self.comparison_sigma_log >= 0.0 && self.comparison_sigma_log.is_finite()) {
            return Err(Error::config("comparison_sigma_log must be >= 0"));
        }
        if !positive(self.p_recv) {
            return Err(Error::config("p_recv must be > 0"));
        }
        if !(self.l_mean >= 1.0 && self.l_mean <= num_taps as f64) {
            return Err(Error::config(format!("l_mean = {} must lie in [1, M = {num_taps}]", self.l_mean)));
        }
        if let Some(c) = self.cluster_count_mean {
            if !(c >= 1.0 && c.is_finite()) {
                return Err(Error::config("cluster_count_mean must be >= 1"));
            }
        }
        if let Some(r) = self.intra_cluster_rate {
            if !positive(r) {
                return Err(Error::config("intra_cluster_rate must be > 0"));
            }
        }
        Ok(())
    }
}

/// Multipath components of one channel realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcSet {
    /// Seconds, strictly increasing, `delays[0] = 0`.
    pub delays: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Radians in `[0, 2π)`.
    pub phases: Vec<f64>,
}

impl MpcSet {
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// `α_ℓ e^{jφ_ℓ}` for every component.
    pub fn complex_gains(&self) -> CVector {
        CVector::from_iterator(
            self.len(),
            self.amplitudes.iter().zip(&self.phases).map(|(&a, &p)| Complex64::from_polar(a, p)),
        )
    }

    pub fn total_power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    /// Writes `tau_s,alpha,phi_rad` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau_s", "alpha", "phi_rad"])?;
        for i in 0..self.len() {
            w.write_record([
                self.delays[i].to_string(),
                self.amplitudes[i].to_string(),
                self.phases[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PulseKind {
    Sinc,
    RaisedCosine { rolloff: f64 },
}

/// Transmit pulse, sampling period and number of taps of the discrete channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    pub kind: PulseKind,
    pub sample_period_s: f64,
    pub num_taps: usize,
}

/// `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

impl PulseConfig {
    /// Energy tolerance of the `M`-tap truncation.
    ///
    /// `|p(τ)|² = 1` holds exactly for on-grid delays of a Nyquist pulse.
    /// Off-grid delays lose the tail energy outside the window, roughly
    /// `1/(π² δ)` per side at distance `δ` samples from that edge, so the
    /// tolerance is met for delays more than about 20 samples from both
    /// window edges.
    pub const TRUNCATION_TOL: f64 = 1e-2;

    pub fn sinc(sample_period_s: f64, num_taps: usize) -> Self {
        Self { kind: PulseKind::Sinc, sample_period_s, num_taps }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period_s > 0.0 && self.sample_period_s.is_finite()) {
            return Err(Error::config("sample_period_s must be > 0"));
        }
        if self.num_taps == 0 {
            return Err(Error::config("num_taps must be >= 1"));
        }
        if let PulseKind::RaisedCosine { rolloff } = self.kind {
            if !(0.0..=1.0).contains(&rolloff) {
                return Err(Error::config("raised-cosine rolloff must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Pulse value at time `t` seconds.
    pub fn eval(&self, t: f64) -> f64 {
        let x = t / self.sample_period_s;
        match self.kind {
            PulseKind::Sinc => sinc(x),
            PulseKind::RaisedCosine { rolloff } => {
                if rolloff == 0.0 {
                    return sinc(x);
                }
                let d = 2.0 * rolloff * x;
                if (d.abs() - 1.0).abs() < 1e-9 {
                    PI / 4.0 * sinc(1.0 / (2.0 * rolloff))
                } else {
                    sinc(x) * (PI * rolloff * x).cos() / (1.0 - d * d)
                }
            }
        }
    }

    /// Longest delay the window covers, `(M − 1)T`.
    pub fn window_s(&self) -> f64 {
        (self.num_taps.saturating_sub(1)) as f64 * self.sample_period_s
    }
}

/// Pulse-delay vector `p(τ) = (p(−τ), p(T − τ), …, p((M−1)T − τ))`.
pub fn pulse_vector(pulse: &PulseConfig, tau: f64) -> CVector {
    CVector::from_iterator(
        pulse.num_taps,
        (0..pulse.num_taps).map(|n| Complex64::new(pulse.eval(n as f64 * pulse.sample_period_s - tau), 0.0)),
    )
}

/// Two delays closer than this fraction of `T` are considered identical.
pub const DELAY_COLLISION_TOL: f64 = 1e-6;

/// `M × L` pulse-delay matrix with column `ℓ = p(τ_ℓ)`.
pub fn pulse_matrix(pulse: &PulseConfig, delays: &[f64]) -> Result<CMatrix> {
    let tol = DELAY_COLLISION_TOL * pulse.sample_period_s;
    for (i, a) in delays.iter().enumerate() {
        if let Some(b) = delays[i + 1..].iter().find(|b| (*b - a).abs() <= tol) {
            return Err(Error::DegenerateDictionary(format!("delays {a:e} s and {b:e} s coincide")));
        }
    }
    let mut p = CMatrix::zeros(pulse.num_taps, delays.len());
    for (j, &tau) in delays.iter().enumerate() {
        p.set_column(j, &pulse_vector(pulse, tau));
    }
    Ok(p)
}

/// Discrete equivalent channel `h_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    pub taps: CVector,
    pub pulse: PulseConfig,
    pub source: Option<MpcSet>,
}

impl DiscreteChannel {
    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    /// `|h_M|²`.
    pub fn energy(&self) -> f64 {
        norm_sqr(&self.taps)
    }

    /// Tap powers `|h_M[n]|²`.
    pub fn tap_powers(&self) -> Vec<f64> {
        self.taps.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Copy scaled to unit energy. The source components are dropped since
    /// they no longer match the taps.
    pub fn normalized(&self) -> Result<Self> {
        let e = self.energy();
        if !(e > 0.0) {
            return Err(Error::UndefinedInput("channel has zero energy".into()));
        }
        Ok(Self { taps: self.taps.unscale(e.sqrt()), pulse: self.pulse, source: None })
    }
}

/// `h_M = Σ_ℓ p(τ_ℓ) α_ℓ e^{jφ_ℓ}`, evaluated tap by tap.
pub fn assemble_channel(mpcs: &MpcSet, pulse: &PulseConfig) -> DiscreteChannel {
    let gains = mpcs.complex_gains();
    let taps = CVector::from_fn(pulse.num_taps, |n, _| {
        let t = n as f64 * pulse.sample_period_s;
        mpcs.delays.iter().zip(gains.iter()).map(|(&tau, g)| g * pulse.eval(t - tau)).sum()
    });
    DiscreteChannel { taps, pulse: *pulse, source: Some(mpcs.clone()) }
}

fn uniform_phase(rng: &mut SimRng) -> f64 {
    rng.random_range(0.0..2.0 * PI)
}

fn complex_gaussian(rng: &mut SimRng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Sample of an exponential with rate `rate` truncated to `[0, width]`.
fn truncated_exponential(rng: &mut SimRng, rate: f64, width: f64) -> f64 {
    let u: f64 = rng.random();
    let span = -(-rate * width).exp_m1();
    let x = -(-u * span).ln_1p() / rate;
    x.clamp(0.0, width)
}

/// Draws a channel with exactly `count` components.
///
/// Arrivals are uniform on `[0, D_s]` (a Poisson process conditioned on its
/// count) or, with clustering, grouped around uniformly placed cluster
/// starts with exponentially decaying intra-cluster offsets. The result is
/// sorted and shifted so the first arrival is at zero.
pub fn sample_mpcs_with_count(config: &ChannelGenConfig, count: usize, rng: &mut SimRng) -> Result<MpcSet> {
    if count == 0 {
        return Err(Error::config("component count must be >= 1"));
    }
    let ds = config.delay_spread_s;
    for _ in 0..MAX_REDRAWS {
        // (delay, log-amplitude shadowing)
        let mut paths: Vec<(f64, f64)> = Vec::with_capacity(count);
        match config.cluster_count_mean {
            None => {
                for _ in 0..count {
                    let z: f64 = StandardNormal.sample(rng);
                    paths.push((rng.random_range(0.0..=ds), config.sigma_alpha * z));
                }
            }
            Some(mean_clusters) => {
                let extra = if mean_clusters > 1.0 {
                    Poisson::new(mean_clusters - 1.0).map_err(|e| Error::config(e.to_string()))?.sample(rng)
                        as usize
                } else {
                    0
                };
                let n_clusters = 1 + extra;
                let rate = config.intra_cluster_rate.unwrap_or(1.0 / (0.1 * ds));
                let clusters: Vec<(f64, f64)> = (0..n_clusters)
                    .map(|c| {
                        let start = if c == 0 { 0.0 } else { rng.random_range(0.0..=ds) };
                        let z: f64 = StandardNormal.sample(rng);
                        (start, config.cluster_sigma * z)
                    })
                    .collect();
                for _ in 0..count {
                    let (start, shadow) = clusters[rng.random_range(0..n_clusters)];
                    let offset = truncated_exponential(rng, rate, ds - start);
                    let z: f64 = StandardNormal.sample(rng);
                    paths.push((start + offset, shadow + config.sigma_alpha * z));
                }
            }
        }
        paths.sort_by(|a, b| a.0.total_cmp(&b.0));
        let t0 = paths[0].0;
        if paths.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            continue;
        }
        let delays: Vec<f64> = paths.iter().map(|p| p.0 - t0).collect();
        if delays.windows(2).any(|w| !(w[1] > w[0])) {
            continue;
        }
        let log_amp: Vec<f64> =
            delays.iter().zip(&paths).map(|(&tau, p)| -tau / config.gamma_decay_s + p.1).collect();
        // Normalize in the log domain so large shadowing does not overflow.
        let peak = log_amp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = log_amp.iter().map(|l| (l - peak).exp()).collect();
        let raw_power: f64 = raw.iter().map(|a| a * a).sum();
        let scale = (config.p_recv / raw_power).sqrt();
        let amplitudes = raw.iter().map(|a| a * scale).collect();
        let phases = (0..count).map(|_| uniform_phase(rng)).collect();
        return Ok(MpcSet { delays, amplitudes, phases });
    }
    Err(Error::config(format!("could not draw {count} distinct delays in {MAX_REDRAWS} attempts")))
}

/// Draws a random multipath channel for a discrete channel with `num_taps`
/// taps. The component count is Poisson with mean `l_mean`; draws with zero
/// components or more than `num_taps` are rejected and redrawn.
pub fn sample_mpcs(config: &ChannelGenConfig, num_taps: usize, rng: &mut SimRng) -> Result<MpcSet> {
    config.validate(num_taps)?;
    let count_dist = Poisson::new(config.l_mean).map_err(|e| Error::config(e.to_string()))?;
    for _ in 0..MAX_REDRAWS {
        let count = count_dist.sample(rng) as usize;
        if count == 0 || count > num_taps {
            continue;
        }
        return sample_mpcs_with_count(config, count, rng);
    }
    Err(Error::config(format!("no component count in [1, {num_taps}] after {MAX_REDRAWS} draws")))
}

/// Tap-domain generators used as comparison ensembles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComparisonKind {
    /// `L` uniformly placed taps with i.i.d. complex Gaussian values.
    BernoulliGaussian,
    /// `L` uniformly placed taps with lognormal magnitude and uniform phase.
    BernoulliLognormal { sigma_log: f64 },
    /// All taps i.i.d. complex Gaussian.
    DenseGaussian,
}

impl ComparisonKind {
    pub fn from_config(config: &ChannelGenConfig) -> Result<Self> {
        match config.distribution_kind {
            DistributionKind::BernoulliGaussian => Ok(ComparisonKind::BernoulliGaussian),
            DistributionKind::BernoulliLognormal => {
                Ok(ComparisonKind::BernoulliLognormal { sigma_log: config.comparison_sigma_log })
            }
            DistributionKind::DenseGaussian => Ok(ComparisonKind::DenseGaussian),
            DistributionKind::MmwaveLognormal => {
                Err(Error::config("mmwave_lognormal is not a tap-domain comparison generator"))
            }
        }
    }
}

/// Draws a unit-energy tap vector from a comparison ensemble.
pub fn sample_comparison_channel(
    kind: ComparisonKind,
    pulse: &PulseConfig,
    support: usize,
    rng: &mut SimRng,
) -> Result<DiscreteChannel> {
    let m = pulse.num_taps;
    if support == 0 || support > m {
        return Err(Error::dimension(format!("support size {support} must lie in [1, M = {m}]")));
    }
    let mut taps = CVector::zeros(m);
    match kind {
        ComparisonKind::DenseGaussian => {
            for t in taps.iter_mut() {
                *t = complex_gaussian(rng);
            }
        }
        ComparisonKind::BernoulliGaussian | ComparisonKind::BernoulliLognormal { .. } => {
            let mut idx = rand::seq::index::sample(rng, m, support).into_vec();
            idx.sort_unstable();
            for n in idx {
                taps[n] = match kind {
                    ComparisonKind::BernoulliLognormal { sigma_log } => {
                        let z: f64 = StandardNormal.sample(rng);
                        Complex64::from_polar((sigma_log * z).exp(), uniform_phase(rng))
                    }
                    _ => complex_gaussian(rng),
                };
            }
        }
    }
    let e = norm_sqr(&taps);
    if !(e > 0.0) {
        return Err(Error::UndefinedInput("drew an all-zero channel".into()));
    }
    taps.unscale_mut(e.sqrt());
    Ok(DiscreteChannel { taps, pulse: *pulse, source: None })
}

/// Draws one channel according to `config.distribution_kind`. Comparison
/// ensembles use `round(l_mean)` nonzero taps.
pub fn sample_channel(
    config: &ChannelGenConfig,
    pulse: &PulseConfig,
    rng: &mut SimRng,
) -> Result<DiscreteChannel> {
    match config.distribution_kind {
        DistributionKind::MmwaveLognormal => {
            let mpcs = sample_mpcs(config, pulse.num_taps, rng)?;
            Ok(assemble_channel(&mpcs, pulse))
        }
        _ => {
            config.validate(pulse.num_taps)?;
            let kind = ComparisonKind::from_config(config)?;
            sample_comparison_channel(kind, pulse, config.l_mean.round() as usize, rng)
        }
    }
}
