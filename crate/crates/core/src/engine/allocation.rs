//! Sample allocation, the blended target and the level-addition test.

use crate::error::{Error, Result};

/// Relative distance below which a computed sample count is treated as the
/// integer it approximates before the ceiling is taken.
const SNAP: f64 = 1e-9;

fn check_pairs(sigma2: &[f64], work: &[f64], epsilon: f64) -> Result<()> {
    if sigma2.len() != work.len() || sigma2.is_empty() {
        return Err(Error::contract(format!(
            "need matching nonempty variance and work lists, got {} and {}",
            sigma2.len(),
            work.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::contract(format!("epsilon must be positive, got {epsilon}")));
    }
    for (l, (&s, &w)) in sigma2.iter().zip(work).enumerate() {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::contract(format!("variance of level {l} must be finite and >= 0, got {s}")));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::contract(format!("work of level {l} must be positive, got {w}")));
        }
    }
    Ok(())
}

/// Unrounded minimizer of the total work under `sum sigma2 / M = eps^2 / 4`.
pub fn optimal_samples_real(sigma2: &[f64], work: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_pairs(sigma2, work, epsilon)?;
    let total: f64 = sigma2.iter().zip(work).map(|(s, w)| (s * w).sqrt()).sum();
    let scale = 4.0 / (epsilon * epsilon);
    Ok(sigma2
        .iter()
        .zip(work)
        .map(|(s, w)| scale * (s / w).sqrt() * total)
        .collect())
}

/// Ceiling that ignores round-off just above an integer.
pub fn snap_ceil(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * r.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// `M_l = ceil((eps/2)^-2 sqrt(sigma_l^2 / w_l) sum_k sqrt(sigma_k^2 w_k))`,
/// at least 1.
pub fn optimal_samples(sigma2: &[f64], work: &[f64], epsilon: f64) -> Result<Vec<u64>> {
    Ok(optimal_samples_real(sigma2, work, epsilon)?
        .into_iter()
        .map(|m| snap_ceil(m).max(1))
        .collect())
}

/// Lower confidence bound of the optimal sample count of `level`.
pub fn samples_lower(
    sigma_lowers: &[f64],
    w_lowers: &[f64],
    w_upper_l: f64,
    epsilon: f64,
    level: usize,
) -> Result<f64> {
    if sigma_lowers.len() != w_lowers.len() || level >= sigma_lowers.len() {
        return Err(Error::contract(format!(
            "level {level} is outside the snapshot of {} levels",
            sigma_lowers.len()
        )));
    }
    if !(epsilon > 0.0) || !(w_upper_l > 0.0) {
        return Err(Error::contract("epsilon and the upper work bound must be positive"));
    }
    if sigma_lowers.iter().chain(w_lowers).any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::contract("confidence bounds must be finite and >= 0"));
    }
    let total: f64 = sigma_lowers.iter().zip(w_lowers).map(|(s, w)| s * w.sqrt()).sum();
    Ok(4.0 / (epsilon * epsilon) * sigma_lowers[level] / w_upper_l.sqrt() * total)
}

/// Default blending weights for the first iterations; later ones use 0.
pub const DEFAULT_ZETA: [f64; 2] = [1.0, 0.5];

/// Blending weight for iteration `iter` (1-based) of a level.
pub fn zeta(schedule: &[f64], iter: usize, m_lower: f64, m_hat: f64, m_tot: u64) -> f64 {
    let z = match iter {
        0 => schedule.first().copied().unwrap_or(0.0),
        i => schedule.get(i - 1).copied().unwrap_or(0.0),
    };
    let m = m_tot as f64;
    if z > 0.0 && m_lower <= m && m < m_hat {
        0.0
    } else {
        z
    }
}

/// `M~ = zeta M_lower + (1 - zeta) M_hat` with the default schedule.
pub fn blended_target(m_lower: f64, m_hat: f64, iter: usize, m_tot: u64) -> f64 {
    blended_target_with(&DEFAULT_ZETA, m_lower, m_hat, iter, m_tot)
}

pub fn blended_target_with(schedule: &[f64], m_lower: f64, m_hat: f64, iter: usize, m_tot: u64) -> f64 {
    let z = zeta(schedule, iter, m_lower, m_hat, m_tot);
    z * m_lower + (1.0 - z) * m_hat
}

/// Geometric bias decay factor `lambda^(-kappa1 q0~) h0^(kappa1 beta)`.
pub fn bias_decay_ratio(h0: f64, lambda: f64, kappa1: f64, q0_tilde: f64, beta: f64) -> f64 {
    lambda.powf(-kappa1 * q0_tilde) * h0.powf(kappa1 * beta)
}

/// Extrapolated remaining bias `max_j rho^(j+1) / (1 - rho) b_(L-j)` over
/// the last three entries of `bias`.
pub fn bias_bound(bias: &[f64], rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::config(
            "hierarchy",
            format!("bias decay factor {rho} is not in (0, 1); the hierarchy cannot certify bias decay"),
        ));
    }
    Ok(bias
        .iter()
        .rev()
        .take(3)
        .enumerate()
        .map(|(j, b)| rho.powi(j as i32 + 1) / (1.0 - rho) * b)
        .fold(0.0, f64::max))
}

/// True when another level is needed. With fewer than three bias entries
/// the answer is always true.
pub fn should_add_level(
    bias_tail: &[f64],
    h0: f64,
    lambda: f64,
    kappa1: f64,
    q0_tilde: f64,
    beta: f64,
    epsilon: f64,
) -> Result<bool> {
    let rho = bias_decay_ratio(h0, lambda, kappa1, q0_tilde, beta);
    let bound = bias_bound(bias_tail, rho)?;
    if bias_tail.len() < 3 {
        return Ok(true);
    }
    Ok(bound > 0.5 * epsilon)
}
