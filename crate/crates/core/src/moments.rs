//! Exact second moments of quadratic functionals of fBm increments.
//!
//! For centred jointly Gaussian `X_k` with covariance `ρ_{kl}`,
//! `Cov(X_k^2, X_l^2) = 2 ρ_{kl}^2`. Stationarity of the increments reduces the
//! double sum over blocks to a sum over lags.

use crate::error::{Error, Result};
use crate::fbm::fgn_autocov;
use crate::model::{nu, HurstIndex};

/// `Σ_{k,l < blocks} ρ_{kl}^2` for increments of length `step`.
pub fn sum_sq_increment_cov(h: HurstIndex, step: f64, blocks: usize) -> f64 {
    let mut total = blocks as f64 * fgn_autocov(h, step, 0).powi(2);
    for lag in 1..blocks {
        let rho = fgn_autocov(h, step, lag as u64);
        total += 2.0 * (blocks - lag) as f64 * rho * rho;
    }
    total
}

fn blocks(n: usize, t: f64, horizon: f64) -> Result<usize> {
    if n == 0 || !(0.0..=horizon).contains(&t) {
        return Err(Error::InvalidInput(format!("need n >= 1 and 0 <= t <= T, got n={n}, t={t}")));
    }
    Ok((n as f64 * t / horizon + 1e-9).floor() as usize)
}

/// `Var(Z_n(t)) = (n^2 / 2) Σ_{k,l < ⌊nt⌋} ρ_{kl}^2` on `[0, 1]`.
pub fn rosenblatt_approx_variance(h: HurstIndex, n: usize, t: f64) -> Result<f64> {
    let b = blocks(n, t, 1.0)?;
    let x = n as f64;
    Ok(0.5 * x * x * sum_sq_increment_cov(h, 1.0 / x, b))
}

/// `Var(n^{2H-1} Σ_{k < ⌊nt⌋} (ΔB_k)^2)` on `[0, 1]`.
pub fn quad_variation_variance(h: HurstIndex, n: usize, t: f64) -> Result<f64> {
    let b = blocks(n, t, 1.0)?;
    let x = n as f64;
    Ok(2.0 * x.powf(2.0 * h.two_h() - 2.0) * sum_sq_increment_cov(h, 1.0 / x, b))
}

/// `Var(ν_H(n) (M^n_1 - ½))` for `u = B` on `[0, 1]`, where
/// `M^n_1 - ½ = n^{2H-1} Σ_k ½((ΔB_k)^2 - n^{-2H})`.
pub fn normalized_error_variance_for_b(h: HurstIndex, n: usize) -> Result<f64> {
    let v = nu(h, n as u64)?;
    Ok(v * v * quad_variation_variance(h, n, 1.0)? / 4.0)
}
