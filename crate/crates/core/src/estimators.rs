//! Streaming per-level statistics.
//!
//! Central moments up to order four are kept per quadrature node and updated
//! with the pairwise-mergeable formulas of Pébay (2008), so batches can be
//! accumulated independently and combined in a fixed order.

use serde::Serialize;

use crate::dg::field::Field;
use crate::dg::mesh::Mesh2D;
use crate::error::{Error, Result};
use crate::hierarchy::{DiffField, LevelSpec};

/// Count, mean and second central sum of a scalar stream.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.merge(&RunningStats { n: 1, mean: x, m2: 0.0 });
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.n += other.n;
    }

    /// Unbiased standard deviation; zero for fewer than two values.
    pub fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0).sqrt()
        }
    }
}

/// Result of a log-log least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
}

/// Running statistics of the level differences on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelAccumulator {
    pub level: LevelSpec,
    pub mesh: Mesh2D,
    /// Degree of the storage layout, `max(q_l, q_{l-1})`.
    pub q: usize,
    pub m_tot: u64,
    /// Iteration counter of the sampling loop.
    pub iter: usize,
    weights: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    m3: Vec<f64>,
    m4: Vec<f64>,
    pub work_units: RunningStats,
    pub work_seconds: RunningStats,
}

impl LevelAccumulator {
    pub fn new(level: LevelSpec, mesh: Mesh2D, q: usize) -> Self {
        let weights = Field::zeros(mesh, q).quadrature_weights();
        let n = weights.len();
        LevelAccumulator {
            level,
            mesh,
            q,
            m_tot: 0,
            iter: 0,
            weights,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
            m3: vec![0.0; n],
            m4: vec![0.0; n],
            work_units: RunningStats::default(),
            work_seconds: RunningStats::default(),
        }
    }

    fn check(&self, d: &DiffField) -> Result<()> {
        if d.level != self.level || d.field.mesh != self.mesh || d.field.q != self.q {
            return Err(Error::contract(format!(
                "difference for level {} ({}x{}, q={}) does not match accumulator of level {} ({}x{}, q={})",
                d.level.level,
                d.field.mesh.n_per_dim,
                d.field.mesh.n_per_dim,
                d.field.q,
                self.level.level,
                self.mesh.n_per_dim,
                self.mesh.n_per_dim,
                self.q
            )));
        }
        Ok(())
    }

    /// Accumulator holding exactly one sample.
    fn singleton(&self, d: &DiffField, units: f64, seconds: f64) -> Result<Self> {
        self.check(d)?;
        let n = self.weights.len();
        let mut out = LevelAccumulator {
            m_tot: 1,
            mean: d.field.values.clone(),
            m2: vec![0.0; n],
            m3: vec![0.0; n],
            m4: vec![0.0; n],
            work_units: RunningStats::default(),
            work_seconds: RunningStats::default(),
            ..self.empty_like()
        };
        out.work_units.push(units);
        out.work_seconds.push(seconds);
        Ok(out)
    }

    fn empty_like(&self) -> Self {
        let n = self.weights.len();
        LevelAccumulator {
            level: self.level,
            mesh: self.mesh,
            q: self.q,
            m_tot: 0,
            iter: 0,
            weights: self.weights.clone(),
            mean: vec![0.0; n],
            m2: vec![0.0; n],
            m3: vec![0.0; n],
            m4: vec![0.0; n],
            work_units: RunningStats::default(),
            work_seconds: RunningStats::default(),
        }
    }

    pub fn update(&mut self, d: &DiffField, work_units: f64, work_seconds: f64) -> Result<()> {
        let one = self.singleton(d, work_units, work_seconds)?;
        self.merge(&one)
    }

    /// Accumulates a batch with a balanced pairwise reduction in slice order.
    pub fn update_batch(&mut self, batch: &[(DiffField, f64, f64)]) -> Result<()> {
        let mut parts = batch
            .iter()
            .map(|(d, u, s)| self.singleton(d, *u, *s))
            .collect::<Result<Vec<_>>>()?;
        if parts.is_empty() {
            return Ok(());
        }
        while parts.len() > 1 {
            let mut next = Vec::with_capacity(parts.len().div_ceil(2));
            let mut it = parts.into_iter();
            while let Some(mut a) = it.next() {
                if let Some(b) = it.next() {
                    a.merge(&b)?;
                }
                next.push(a);
            }
            parts = next;
        }
        self.merge(&parts[0])
    }

    /// Combines the statistics of `other` into `self`. The iteration counter
    /// of `self` is kept.
    pub fn merge(&mut self, other: &LevelAccumulator) -> Result<()> {
        if other.level != self.level || other.mesh != self.mesh || other.q != self.q {
            return Err(Error::contract("cannot merge accumulators of different levels"));
        }
        if other.m_tot == 0 {
            return Ok(());
        }
        if self.m_tot == 0 {
            let iter = self.iter;
            *self = other.clone();
            self.iter = iter;
            return Ok(());
        }
        let na = self.m_tot as f64;
        let nb = other.m_tot as f64;
        let n = na + nb;
        let (nn, nnn) = (n * n, n * n * n);
        for k in 0..self.mean.len() {
            let d = other.mean[k] - self.mean[k];
            let d2 = d * d;
            let (a2, a3, a4) = (self.m2[k], self.m3[k], self.m4[k]);
            let (b2, b3, b4) = (other.m2[k], other.m3[k], other.m4[k]);
            self.m4[k] = a4
                + b4
                + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / nnn
                + 6.0 * d2 * (na * na * b2 + nb * nb * a2) / nn
                + 4.0 * d * (na * b3 - nb * a3) / n;
            self.m3[k] = a3 + b3 + d2 * d * na * nb * (na - nb) / nn + 3.0 * d * (na * b2 - nb * a2) / n;
            self.m2[k] = a2 + b2 + d2 * na * nb / n;
            self.mean[k] += d * nb / n;
        }
        self.m_tot += other.m_tot;
        self.work_units.merge(&other.work_units);
        self.work_seconds.merge(&other.work_seconds);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.m_tot == 0
    }

    /// Sample mean of the differences, `E[U_l] - E[U_{l-1}]` estimate.
    pub fn mean_field(&self) -> Result<Field> {
        if self.m_tot == 0 {
            return Err(Error::state(format!("level {} has no samples", self.level.level)));
        }
        Ok(Field {
            mesh: self.mesh,
            q: self.q,
            values: self.mean.clone(),
            origin: None,
        })
    }

    /// Unbiased estimate of `E ||D - E D||^2` for the difference `D`.
    pub fn level_variance(&self) -> Result<f64> {
        if self.m_tot < 2 {
            return Err(Error::state(format!(
                "level {} variance needs at least 2 samples, has {}",
                self.level.level, self.m_tot
            )));
        }
        let s: f64 = self.weights.iter().zip(&self.m2).map(|(w, m)| w * m).sum();
        Ok((s / (self.m_tot - 1) as f64).max(0.0))
    }

    /// L2 norm of the per-node average fourth central power.
    pub fn fourth_moment(&self) -> Result<f64> {
        if self.m_tot < 4 {
            return Err(Error::state(format!(
                "level {} has {} samples; the fourth moment needs 4, use the unadjusted degrees of freedom",
                self.level.level, self.m_tot
            )));
        }
        let m = self.m_tot as f64;
        let avg: Vec<f64> = self.m4.iter().map(|v| (v / m).max(0.0)).collect();
        Ok(crate::dg::field::l2_norm(&avg, &self.weights))
    }

    /// Mean and unbiased standard deviation of the per-sample work.
    pub fn work_stats(&self, measure: WorkMeasure) -> Result<(f64, f64)> {
        if self.m_tot == 0 {
            return Err(Error::state(format!("level {} has no work samples", self.level.level)));
        }
        let s = match measure {
            WorkMeasure::Units => &self.work_units,
            WorkMeasure::Seconds => &self.work_seconds,
        };
        Ok((s.mean, s.std()))
    }
}

/// Which per-sample cost drives the allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkMeasure {
    #[default]
    Units,
    Seconds,
}

/// `||E[U_l] - E[U_{l-1}]||` for every level, including level 0 where the
/// entry is `||E[U_0]||`.
pub fn bias_series(accs: &[LevelAccumulator]) -> Result<Vec<f64>> {
    if accs.is_empty() {
        return Err(Error::state("no levels to build a bias series from"));
    }
    accs.iter().map(|a| Ok(a.mean_field()?.l2_norm())).collect()
}

/// Least squares line through `(ln x, ln y)` over the last `window` points.
pub fn fit_rate(x: &[f64], y: &[f64], window: usize) -> Result<FitResult> {
    if window < 2 {
        return Err(Error::contract(format!("fit window must be at least 2, got {window}")));
    }
    if x.len() != y.len() || x.len() < window {
        return Err(Error::contract(format!(
            "fit needs two series of equal length >= {window}, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::contract("fit data must be positive and finite"));
    }
    let start = x.len() - window;
    let lx: Vec<f64> = x[start..].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y[start..].iter().map(|v| v.ln()).collect();
    let k = window as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::contract("fit abscissae are all equal"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(FitResult {
        slope,
        intercept: my - slope * mx,
        points_used: window,
    })
}

/// `sqrt(sum sigma_l^2 / M_l)`.
pub fn statistical_error(variances: &[f64], counts: &[u64]) -> Result<f64> {
    if variances.len() != counts.len() {
        return Err(Error::contract("variances and counts differ in length"));
    }
    if counts.contains(&0) {
        return Err(Error::contract("sample counts must be at least 1"));
    }
    Ok(variances
        .iter()
        .zip(counts)
        .map(|(s, &m)| s / m as f64)
        .sum::<f64>()
        .sqrt())
}
