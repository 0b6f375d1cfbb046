//! One-sided confidence bounds for level variances and per-sample work.

use crate::error::{Error, Result};
use crate::estimators::{LevelAccumulator, WorkMeasure};
use crate::quantiles::{chi2_quantile, normal_quantile};

/// Excess kurtosis estimate from `M` samples, the unbiased sample variance
/// `sigma2` and the sum of fourth central powers `mu4`.
pub fn excess_kurtosis(m: u64, sigma2: f64, mu4: f64) -> Result<f64> {
    if m < 4 {
        return Err(Error::state(format!("kurtosis needs at least 4 samples, got {m}")));
    }
    if sigma2 <= 0.0 {
        return Ok(0.0);
    }
    let m = m as f64;
    let a = m * (m + 1.0) / ((m - 1.0) * (m - 2.0) * (m - 3.0));
    let b = 3.0 * (m - 1.0) * (m - 1.0) / ((m - 2.0) * (m - 3.0));
    Ok(a * mu4 / (sigma2 * sigma2) - b)
}

/// Kurtosis-adjusted chi-square degrees of freedom. Below four samples the
/// unadjusted `M - 1` is returned.
pub fn adjusted_dof(m: u64, gamma_e: Option<f64>) -> f64 {
    let mf = m as f64;
    match gamma_e {
        Some(g) if m >= 4 => {
            let g = g.max(0.0);
            2.0 * mf / (g + 2.0 * mf / (mf - 1.0))
        }
        _ => mf - 1.0,
    }
}

/// `sqrt(r sigma2 / chi2_(1 - alpha/2, r))` for a level with `m` samples.
///
/// `mu4` is the sum of fourth central powers; pass `None` to use `r = M - 1`.
pub fn sigma_lower_from(m: u64, sigma2: f64, mu4: Option<f64>, alpha: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::state(format!("variance bound needs at least 2 samples, got {m}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::contract(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if sigma2 <= 0.0 {
        return Ok(0.0);
    }
    let gamma = match mu4 {
        Some(mu4) if m >= 4 => Some(excess_kurtosis(m, sigma2, mu4)?),
        _ => None,
    };
    let r = adjusted_dof(m, gamma);
    let chi = chi2_quantile(1.0 - 0.5 * alpha, r)?;
    Ok((r * sigma2 / chi).sqrt())
}

/// Lower bound of the level standard deviation from an accumulator.
pub fn sigma_lower(acc: &LevelAccumulator, alpha: f64) -> Result<f64> {
    let sigma2 = acc.level_variance()?;
    let mu4 = if acc.m_tot >= 4 {
        Some(acc.fourth_moment()? * acc.m_tot as f64)
    } else {
        None
    };
    sigma_lower_from(acc.m_tot, sigma2, mu4, alpha)
}

/// `w_hat -/+ z_(1 - alpha/2) s_w / sqrt(M)`, the lower end clamped at
/// `max(f64::MIN_POSITIVE, 0.01 w_hat)`.
pub fn work_bounds_from(m: u64, mean: f64, std: f64, alpha: f64) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::state(format!("work bounds need at least 2 samples, got {m}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::contract(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let half = normal_quantile(1.0 - 0.5 * alpha) * std / (m as f64).sqrt();
    let floor = f64::MIN_POSITIVE.max(0.01 * mean);
    Ok(((mean - half).max(floor).min(mean), mean + half))
}

pub fn work_bounds(acc: &LevelAccumulator, measure: WorkMeasure, alpha: f64) -> Result<(f64, f64)> {
    let (mean, std) = acc.work_stats(measure)?;
    work_bounds_from(acc.m_tot, mean, std, alpha)
}
