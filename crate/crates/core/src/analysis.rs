//! Error metrics and compressibility analysis.
//!
//! The power fairness index `FI(v) = (Σ|v|²)² / (M Σ|v|⁴)` scores how evenly
//! the energy of a vector is spread: `1` for equal magnitudes, `1/M` for a
//! single nonzero entry. The residual-power profile `ρ̄(d)` is the energy (over
//! `K`) left after removing the `d` strongest taps, and the FI of the
//! remaining taps sandwiches each of its decay factors.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::channel_model::DiscreteChannel;
use crate::error::{Error, Result};

/// `(Σp)² / (n Σp²)` over a set of `n` powers.
pub fn power_fairness_index(powers: &[f64]) -> Result<f64> {
    let sum: f64 = powers.iter().sum();
    let sum_sq: f64 = powers.iter().map(|p| p * p).sum();
    if powers.is_empty() || !(sum > 0.0) || !(sum_sq > 0.0) {
        return Err(Error::UndefinedInput("fairness index of an all-zero set".into()));
    }
    Ok(sum * sum / (powers.len() as f64 * sum_sq))
}

/// Power fairness index of a complex vector.
pub fn fairness_index(v: &[Complex64]) -> Result<f64> {
    // Normalizing first keeps |v|⁴ away from under/overflow.
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::UndefinedInput("fairness index of an all-zero vector".into()));
    }
    let powers: Vec<f64> = v.iter().map(|z| (z / peak).norm_sqr()).collect();
    power_fairness_index(&powers)
}

/// Compressibility curves of one channel, computed on its unit-energy copy.
///
/// All curves are indexed by `d`, the number of strongest taps removed.
/// `rho_bar` has `M + 1` entries with `rho_bar[0] = 1/K` and
/// `rho_bar[M] = 0`. `fi_residuals[d] = FI(R_d)` and the FI bound curves stop
/// at the first `d` whose residual set is all zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressibilityProfile {
    /// Tap powers in non-increasing order, summing to one.
    pub sorted_powers: Vec<f64>,
    pub rho_bar: Vec<f64>,
    pub fi_full: f64,
    pub fi_residuals: Vec<f64>,
    pub bound_lower_fi: Vec<f64>,
    pub bound_upper_fi: Vec<f64>,
    pub bound_geometric: Vec<f64>,
    pub k: usize,
    /// Largest disagreement between the closed and recursive forms of `ρ̄`.
    pub recursion_gap: f64,
}

impl CompressibilityProfile {
    pub fn num_taps(&self) -> usize {
        self.sorted_powers.len()
    }

    /// Writes `d,rho_bar,bound_lower_fi,bound_upper_fi,bound_geometric,fi_residual`
    /// rows. Undefined entries are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "d",
            "rho_bar",
            "bound_lower_fi",
            "bound_upper_fi",
            "bound_geometric",
            "fi_residual",
        ])?;
        let cell = |v: Option<&f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for d in 0..self.rho_bar.len() {
            w.write_record([
                d.to_string(),
                self.rho_bar[d].to_string(),
                cell(self.bound_lower_fi.get(d)),
                cell(self.bound_upper_fi.get(d)),
                cell(self.bound_geometric.get(d)),
                cell(self.fi_residuals.get(d)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the [`CompressibilityProfile`] of a channel.
pub fn rho_bar_profile(h: &DiscreteChannel, k: usize) -> Result<CompressibilityProfile> {
    compressibility_profile(h.taps.as_slice(), k)
}

/// [`rho_bar_profile`] on raw taps.
pub fn compressibility_profile(taps: &[Complex64], k: usize) -> Result<CompressibilityProfile> {
    if k == 0 {
        return Err(Error::dimension("K must be >= 1"));
    }
    let energy: f64 = taps.iter().map(|z| z.norm_sqr()).sum();
    if !(energy > 0.0) {
        return Err(Error::UndefinedInput("channel has zero energy".into()));
    }
    let m = taps.len();
    let kf = k as f64;
    let mut sorted: Vec<f64> = taps.iter().map(|z| z.norm_sqr() / energy).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));

    // suffix[d] = Σ_{i ≥ d} sorted[i], the energy of R_d.
    let mut suffix = vec![0.0; m + 1];
    for d in (0..m).rev() {
        suffix[d] = suffix[d + 1] + sorted[d];
    }
    let rho_bar: Vec<f64> = suffix.iter().map(|s| s / kf).collect();

    // Closed form (1 − Σ_{i<d} m_i)/K and the multiplicative recursion.
    let total = suffix[0];
    let mut recursion_gap: f64 = 0.0;
    let mut prefix = 0.0;
    let mut rec = total / kf;
    for d in 1..=m {
        prefix += sorted[d - 1];
        let closed = (total - prefix) / kf;
        if suffix[d - 1] > 0.0 {
            rec *= 1.0 - sorted[d - 1] / suffix[d - 1];
        }
        recursion_gap = recursion_gap.max((closed - rho_bar[d]).abs()).max((rec - rho_bar[d]).abs());
    }

    let mut fi_residuals = Vec::with_capacity(m);
    for d in 0..m {
        match power_fairness_index(&sorted[d..]) {
            Ok(fi) if suffix[d] > 0.0 => fi_residuals.push(fi),
            _ => break,
        }
    }

    let mut bound_lower_fi = vec![total / kf];
    let mut bound_upper_fi = vec![total / kf];
    for (i, fi) in fi_residuals.iter().enumerate() {
        let n = (m - i) as f64;
        let lower = 1.0 - 1.0 / (n * fi).sqrt();
        let upper = 1.0 - 1.0 / (n * fi.sqrt());
        bound_lower_fi.push(bound_lower_fi[i] * lower.max(0.0));
        bound_upper_fi.push(bound_upper_fi[i] * upper.max(0.0));
    }

    let fi_full = fi_residuals[0];
    let bound_geometric = (0..=m).map(|d| geometric_bound(fi_full, m, d, k)).collect();

    Ok(CompressibilityProfile {
        sorted_powers: sorted,
        rho_bar,
        fi_full,
        fi_residuals,
        bound_lower_fi,
        bound_upper_fi,
        bound_geometric,
        k,
        recursion_gap,
    })
}

/// Product bounds `(lower, upper)` on `ρ̄(d)` from the residual fairness
/// indices `FI(R_0) … FI(R_{d−1})`.
pub fn fi_bounds(profile: &CompressibilityProfile, d: usize) -> Result<(f64, f64)> {
    let m = profile.num_taps();
    if d > m {
        return Err(Error::dimension(format!("d = {d} exceeds M = {m}")));
    }
    match (profile.bound_lower_fi.get(d), profile.bound_upper_fi.get(d)) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::UndefinedInput(format!(
            "residual set empty before d = {d}; bounds stop at d = {}",
            profile.bound_lower_fi.len() - 1
        ))),
    }
}

/// Geometric approximation `(1 − 1/√(M·FI(h_M)))^d / K` for a unit-energy
/// channel.
pub fn geometric_bound(fi_full: f64, m: usize, d: usize, k: usize) -> f64 {
    let base = (1.0 - 1.0 / (m as f64 * fi_full).sqrt()).max(0.0);
    base.powi(d as i32) / k as f64
}

/// Per-step test of the assumption that removing the strongest remaining tap
/// raises the FI by at least `(M−d+1)/(M−d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiStepCheck {
    /// `FI(R_d)/FI(R_{d−1}) · (M−d)/(M−d+1)` for `d = 1, 2, …`; the
    /// assumption holds at `d` when the entry is at least one.
    pub ratios: Vec<f64>,
    /// First `d ≤ d_max` at which `R_d` is all zero.
    pub truncated_at: Option<usize>,
}

impl FiStepCheck {
    pub fn holds_count(&self) -> usize {
        self.ratios.iter().filter(|&&r| r >= 1.0).count()
    }

    pub fn holds_everywhere(&self) -> bool {
        self.truncated_at.is_none() && self.ratios.iter().all(|&r| r >= 1.0)
    }
}

pub fn fi_step_assumption_check(h: &DiscreteChannel, d_max: usize) -> Result<FiStepCheck> {
    let m = h.num_taps();
    if d_max >= m {
        return Err(Error::dimension(format!("d_max = {d_max} must be below M = {m}")));
    }
    let profile = rho_bar_profile(h, 1)?;
    let fi = &profile.fi_residuals;
    let mut ratios = Vec::with_capacity(d_max);
    let mut truncated_at = None;
    for d in 1..=d_max {
        if d >= fi.len() {
            truncated_at = Some(d);
            break;
        }
        let md = (m - d) as f64;
        ratios.push(fi[d] / fi[d - 1] * md / (md + 1.0));
    }
    Ok(FiStepCheck { ratios, truncated_at })
}

/// Per-subcarrier error `|ĥ − h|² / K`.
pub fn error_variance(h_true: &[Complex64], h_hat: &[Complex64]) -> Result<f64> {
    if h_true.len() != h_hat.len() || h_true.is_empty() {
        return Err(Error::dimension(format!(
            "cannot compare vectors of length {} and {}",
            h_true.len(),
            h_hat.len()
        )));
    }
    let err: f64 = h_true.iter().zip(h_hat).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / h_true.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn channel(taps: &[Complex64]) -> DiscreteChannel {
        DiscreteChannel {
            taps: crate::linalg::CVector::from_column_slice(taps),
            pulse: crate::channel_model::PulseConfig::sinc(1.0, taps.len()),
            source: None,
        }
    }

    #[test]
    fn fi_examples() {
        assert!((fairness_index(&[c(1.0); 4]).unwrap() - 1.0).abs() < 1e-15);
        assert!((fairness_index(&[c(0.0), c(2.0), c(0.0), c(0.0)]).unwrap() - 0.25).abs() < 1e-15);
        let v = [c(3.0), Complex64::new(0.0, 4.0), c(0.0), c(0.0)];
        assert!((fairness_index(&v).unwrap() - 625.0 / 1348.0).abs() < 1e-15);
        assert!(matches!(fairness_index(&[c(0.0); 3]), Err(Error::UndefinedInput(_))));
    }

    #[test]
    fn rho_bar_examples() {
        let p = compressibility_profile(&[c(0.0), c(0.2f64.sqrt()), c(0.5f64.sqrt()), c(0.3f64.sqrt())], 8)
            .unwrap();
        assert!((p.rho_bar[0] - 1.0 / 8.0).abs() < 1e-15);
        assert!((p.rho_bar[1] - 0.0625).abs() < 1e-15);
        assert!((p.rho_bar[2] - 0.2 / 8.0).abs() < 1e-15);
        assert_eq!(p.rho_bar[4], 0.0);
        assert!(p.recursion_gap < 1e-12);
        assert_eq!(p.fi_residuals.len(), 3);

        let single = compressibility_profile(&[c(0.0), c(0.0), Complex64::new(0.0, 5.0)], 4).unwrap();
        assert_eq!(single.rho_bar[1], 0.0);
        assert_eq!(single.bound_lower_fi.len(), 2);
        assert!(matches!(fi_bounds(&single, 2), Err(Error::UndefinedInput(_))));
        let (lo, hi) = fi_bounds(&single, 1).unwrap();
        assert!(lo <= 0.0 + 1e-15 && hi >= 0.0);
    }

    #[test]
    fn equal_power_sandwich_and_one_tap_exactness() {
        let mut taps = vec![c(0.0); 16];
        for t in taps.iter_mut().take(4) {
            *t = c(0.5);
        }
        let p = compressibility_profile(&taps, 1).unwrap();
        for d in 0..=4 {
            let (lo, hi) = fi_bounds(&p, d).unwrap();
            assert!(lo <= p.rho_bar[d] + 1e-15 && p.rho_bar[d] <= hi + 1e-15);
        }
        // With a single nonzero tap max(R)/Σ(R) = 1/√(n·FI) = 1, so the
        // lower product bound is exact.
        let mut one = vec![c(0.0); 16];
        one[5] = c(2.0);
        let p = compressibility_profile(&one, 4).unwrap();
        assert_eq!(p.bound_lower_fi, vec![0.25, 0.0]);
        assert_eq!(&p.rho_bar[..2], &[0.25, 0.0]);
    }

    #[test]
    fn geometric_bound_edges() {
        assert!((geometric_bound(0.3, 128, 0, 512) - 1.0 / 512.0).abs() < 1e-18);
        for d in 1..10 {
            assert_eq!(geometric_bound(1.0 / 128.0, 128, d, 512), 0.0);
        }
    }

    #[test]
    fn step_check_boundary_cases() {
        let dense = channel(&[c(1.0); 32]);
        let chk = fi_step_assumption_check(&dense, 5).unwrap();
        for (i, r) in chk.ratios.iter().enumerate() {
            let d = (i + 1) as f64;
            assert!((r - (32.0 - d) / (33.0 - d)).abs() < 1e-12);
            assert!(*r < 1.0);
        }
        let mut taps = vec![c(0.0); 8];
        taps[3] = c(1.0);
        let chk = fi_step_assumption_check(&channel(&taps), 2).unwrap();
        assert_eq!(chk.truncated_at, Some(1));
        assert!(chk.ratios.is_empty());
    }

    #[test]
    fn error_variance_definition() {
        let h = vec![Complex64::new(0.3, -0.1); 16];
        assert_eq!(error_variance(&h, &h).unwrap(), 0.0);
        let e = Complex64::new(0.1 * 0.6, 0.1 * 0.8);
        let hat: Vec<Complex64> = h.iter().map(|x| x + e).collect();
        assert!((error_variance(&h, &hat).unwrap() - 1e-2).abs() < 1e-15);
        assert!(matches!(error_variance(&h, &hat[..3]), Err(Error::Dimension(_))));
    }

    #[test]
    fn profile_csv_header() {
        let p = compressibility_profile(&[c(1.0), c(0.5)], 2).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("d,rho_bar,bound_lower_fi,bound_upper_fi,bound_geometric,fi_residual\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
