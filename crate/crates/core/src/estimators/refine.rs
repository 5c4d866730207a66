use num_complex::Complex64;

use crate::channel_model::PulseConfig;
use crate::linalg::{CMatrix, CVector};

/// `|p(τ)ᴴ u|` for a back-projected residual `u = Aᴴ r` (length `M`). Equal to
/// the correlation of the pilot-domain atom `A p(τ)` with `r`.
fn correlation(pulse: &PulseConfig, tau: f64, u: &CVector) -> f64 {
    let t = pulse.sample_period_s;
    u.iter().enumerate().map(|(n, &un)| un * pulse.eval(n as f64 * t - tau)).sum::<Complex64>().norm()
}

/// Binary-search refinement of a dictionary delay inside its bin
/// `[coarse_tau − bin/2, coarse_tau + bin/2]`.
///
/// Each step compares the current point with the two points half a step
/// away and keeps the best, then halves the step. For an objective that is
/// concave and symmetric around its peak inside the bin this ends within
/// `bin / 2^(refine_iters + 1)` of the peak. The current point only moves on
/// a strict improvement, so the returned objective is never below the
/// objective at `coarse_tau`.
pub fn refine_delay(
    coarse_tau: f64,
    bin_width: f64,
    residual: &CVector,
    pulse: &PulseConfig,
    pilot_matrix: &CMatrix,
    refine_iters: usize,
) -> f64 {
    let u = pilot_matrix.ad_mul(residual);
    refine_delay_with_backprojection(coarse_tau, bin_width, &u, pulse, refine_iters)
}

/// As [`refine_delay`], with the residual already mapped to the tap domain.
pub fn refine_delay_with_backprojection(
    coarse_tau: f64,
    bin_width: f64,
    backprojected: &CVector,
    pulse: &PulseConfig,
    refine_iters: usize,
) -> f64 {
    let mut x = coarse_tau;
    let mut fx = correlation(pulse, x, backprojected);
    let mut half = bin_width / 2.0;
    for _ in 0..refine_iters {
        let step = half / 2.0;
        let left = x - step;
        let right = x + step;
        let fl = correlation(pulse, left, backprojected);
        let fr = correlation(pulse, right, backprojected);
        if fl > fx && fl >= fr {
            x = left;
            fx = fl;
        } else if fr > fx {
            x = right;
            fx = fr;
        }
        half = step;
    }
    x
}
