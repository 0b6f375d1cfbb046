//! The adaptive sampling loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::allocation::{bias_bound, bias_decay_ratio, blended_target_with, optimal_samples, samples_lower, DEFAULT_ZETA};
use super::confidence::{sigma_lower, work_bounds};
use super::sampler::Sampler;
use crate::dg::Field;
use crate::error::{Error, Result};
use crate::estimators::{bias_series, statistical_error, LevelAccumulator, WorkMeasure};
use crate::hierarchy::LevelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub epsilon: f64,
    /// Overall probability that some confidence bound fails.
    pub alpha: f64,
    /// Warm-up samples per level; levels past the end use the last entry.
    pub warmup: Vec<u64>,
    /// Blending weights for iterations 1, 2, ...; later iterations use 0.
    pub zeta_schedule: Vec<f64>,
    /// Assumed bias rate used when deciding to add a level.
    pub kappa1: f64,
    /// Hard cap on the number of levels.
    pub max_levels: usize,
    pub min_samples_floor: u64,
    pub seed: u64,
    pub work_measure: WorkMeasure,
    /// Samples per parallel task. Fixed so results do not depend on the
    /// number of workers.
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Keep measured wall-clock times. Off for bit-reproducible runs.
    pub record_seconds: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            epsilon: 1e-2,
            alpha: 0.025,
            warmup: vec![100, 10, 3],
            zeta_schedule: DEFAULT_ZETA.to_vec(),
            kappa1: 1.0,
            max_levels: 8,
            min_samples_floor: 3,
            seed: 0,
            work_measure: WorkMeasure::Units,
            batch_size: 16,
            max_iterations: 200,
            record_seconds: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("engine.epsilon", "must be positive and finite"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("engine.alpha", "must lie in (0, 1)"));
        }
        if self.warmup.is_empty() || self.warmup.iter().any(|&k| k < 2) {
            return Err(Error::config("engine.warmup", "needs at least one entry, each >= 2"));
        }
        if self.zeta_schedule.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return Err(Error::config("engine.zeta_schedule", "entries must lie in [0, 1]"));
        }
        if !(self.kappa1 > 0.0 && self.kappa1.is_finite()) {
            return Err(Error::config("engine.kappa1", "must be positive"));
        }
        if self.max_levels < 1 {
            return Err(Error::config("engine.max_levels", "must be at least 1"));
        }
        if self.min_samples_floor < 2 {
            return Err(Error::config("engine.min_samples_floor", "must be at least 2"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("engine.batch_size", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("engine.max_iterations", "must be at least 1"));
        }
        if self.work_measure == WorkMeasure::Seconds && !self.record_seconds {
            return Err(Error::config(
                "engine.work_measure",
                "wall-clock allocation needs recorded times (turn off bit_reproducible)",
            ));
        }
        Ok(())
    }

    pub fn warmup_for(&self, l: usize) -> u64 {
        *self.warmup.get(l).or(self.warmup.last()).unwrap_or(&3)
    }

    /// Miss probability of each one-sided bound: `alpha / (4 (L + 1))`
    /// spread over the four bounds of every level.
    pub fn alpha_per_bound(&self, n_levels: usize) -> f64 {
        self.alpha / (4.0 * n_levels as f64)
    }
}

/// Per-level state of one iteration snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub iter: usize,
    pub level: usize,
    pub m_tot: u64,
    pub sigma2: f64,
    pub sigma_lower: f64,
    pub w_hat: f64,
    pub w_lower: f64,
    pub w_upper: f64,
    pub m_hat: u64,
    pub m_lower: f64,
    pub m_tilde: f64,
    pub cumulative_work_units: f64,
    pub cumulative_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub spec: LevelSpec,
    pub m_tot: u64,
    pub iter: usize,
    pub sigma2: f64,
    pub w_hat: f64,
    pub bias: f64,
    pub work_units: f64,
    pub work_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Certified,
    BiasUncertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub epsilon: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub levels: Vec<LevelSummary>,
    pub rows: Vec<IterationRow>,
    /// `sqrt(sum sigma_l^2 / M_l)`.
    pub eps_stat: f64,
    /// Extrapolated remaining bias.
    pub bias_estimate: f64,
    pub bias_series: Vec<f64>,
    pub total_work_units: f64,
    pub total_seconds: f64,
    /// Levels appended after the start.
    pub levels_added: Vec<usize>,
    pub mean_norm: f64,
    #[serde(skip)]
    pub mean_field: Option<Field>,
    #[serde(skip)]
    pub accumulators: Vec<LevelAccumulator>,
}

/// A run that stopped on an error, with what had been computed so far.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: Error,
    pub partial: Option<Box<RunReport>>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure { error, partial: None }
    }
}

struct Engine<'a, S: Sampler> {
    config: &'a EngineConfig,
    sampler: &'a mut S,
    accs: Vec<LevelAccumulator>,
    rows: Vec<IterationRow>,
    units: f64,
    seconds: f64,
    added: Vec<usize>,
}

impl<'a, S: Sampler> Engine<'a, S> {
    fn new(config: &'a EngineConfig, sampler: &'a mut S) -> Self {
        Engine {
            config,
            sampler,
            accs: Vec::new(),
            rows: Vec::new(),
            units: 0.0,
            seconds: 0.0,
            added: Vec::new(),
        }
    }

    fn open_level(&mut self, l: usize) -> Result<()> {
        while self.sampler.n_levels() <= l {
            self.sampler.add_level()?;
        }
        let (spec, mesh, q) = self.sampler.layout(l)?;
        self.accs.push(LevelAccumulator::new(spec, mesh, q));
        Ok(())
    }

    /// Adds `counts[l]` new samples to every level, continuing each level's
    /// index sequence. Tasks are cut into fixed batches so the merge order
    /// is independent of scheduling.
    fn sample(&mut self, counts: &[u64]) -> Result<()> {
        let bs = self.config.batch_size as u64;
        let mut tasks = Vec::new();
        for (l, &n) in counts.iter().enumerate() {
            let start = self.accs[l].m_tot;
            let mut i = 0;
            while i < n {
                let len = bs.min(n - i);
                tasks.push((l, start + i, len));
                i += len;
            }
        }
        let record = self.config.record_seconds;
        let sampler = &*self.sampler;
        let templates = &self.accs;
        let parts: Vec<(usize, LevelAccumulator)> = tasks
            .par_iter()
            .map(|&(l, first, len)| {
                let batch = (first..first + len)
                    .map(|i| {
                        let s = sampler.sample(l, i)?;
                        let secs = if record { s.seconds } else { 0.0 };
                        Ok((s.diff, s.units, secs))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let t = &templates[l];
                let mut fresh = LevelAccumulator::new(t.level, t.mesh, t.q);
                fresh.update_batch(&batch)?;
                Ok((l, fresh))
            })
            .collect::<Result<Vec<_>>>()?;

        for l in 0..counts.len() {
            let mut level_parts: Vec<LevelAccumulator> =
                parts.iter().filter(|(pl, _)| *pl == l).map(|(_, a)| a.clone()).collect();
            while level_parts.len() > 1 {
                let mut next = Vec::with_capacity(level_parts.len().div_ceil(2));
                let mut it = level_parts.into_iter();
                while let Some(mut a) = it.next() {
                    if let Some(b) = it.next() {
                        a.merge(&b)?;
                    }
                    next.push(a);
                }
                level_parts = next;
            }
            if let Some(p) = level_parts.pop() {
                self.units += p.work_units.mean * p.work_units.n as f64;
                self.seconds += p.work_seconds.mean * p.work_seconds.n as f64;
                self.accs[l].merge(&p)?;
            }
        }
        Ok(())
    }

    fn variances(&self) -> Result<Vec<f64>> {
        self.accs.iter().map(|a| a.level_variance()).collect()
    }

    fn eps_stat(&self) -> Result<f64> {
        let counts: Vec<u64> = self.accs.iter().map(|a| a.m_tot).collect();
        statistical_error(&self.variances()?, &counts)
    }

    fn rho(&self) -> f64 {
        let c = self.sampler.constants();
        bias_decay_ratio(c.h0, c.lambda, self.config.kappa1, c.q0_tilde, c.beta)
    }

    /// One pass of the per-level loop: snapshot, targets and new samples.
    fn iterate(&mut self, iter: usize) -> Result<()> {
        let cfg = self.config;
        let n = self.accs.len();
        let alpha = cfg.alpha_per_bound(n);
        let mut sigma2 = Vec::with_capacity(n);
        let mut w_hat = Vec::with_capacity(n);
        let mut s_low = Vec::with_capacity(n);
        let mut w_low = Vec::with_capacity(n);
        let mut w_up = Vec::with_capacity(n);
        for acc in &self.accs {
            sigma2.push(acc.level_variance()?);
            w_hat.push(acc.work_stats(cfg.work_measure)?.0);
            s_low.push(sigma_lower(acc, 2.0 * alpha)?);
            let (lo, hi) = work_bounds(acc, cfg.work_measure, 2.0 * alpha)?;
            w_low.push(lo);
            w_up.push(hi);
        }
        let m_hat: Vec<u64> = optimal_samples(&sigma2, &w_hat, cfg.epsilon)?
            .into_iter()
            .map(|m| m.max(cfg.min_samples_floor))
            .collect();

        let mut counts = vec![0u64; n];
        let mut pending = Vec::with_capacity(n);
        for l in 0..n {
            let acc = &self.accs[l];
            let m_lower = samples_lower(&s_low, &w_low, w_up[l], cfg.epsilon, l)?;
            let m_tilde = blended_target_with(&cfg.zeta_schedule, m_lower, m_hat[l] as f64, acc.iter, acc.m_tot);
            if acc.m_tot < m_hat[l] {
                let add = (m_tilde - acc.m_tot as f64).ceil();
                counts[l] = if add >= 1.0 { add as u64 } else { 1 };
            }
            pending.push(IterationRow {
                iter,
                level: l,
                m_tot: acc.m_tot,
                sigma2: sigma2[l],
                sigma_lower: s_low[l],
                w_hat: w_hat[l],
                w_lower: w_low[l],
                w_upper: w_up[l],
                m_hat: m_hat[l],
                m_lower,
                m_tilde,
                cumulative_work_units: 0.0,
                cumulative_seconds: 0.0,
            });
        }
        self.sample(&counts)?;
        for acc in &mut self.accs {
            acc.iter += 1;
        }
        for mut row in pending {
            row.cumulative_work_units = self.units;
            row.cumulative_seconds = self.seconds;
            self.rows.push(row);
        }
        Ok(())
    }

    fn warm_up(&mut self, l: usize) -> Result<()> {
        self.open_level(l)?;
        let mut counts = vec![0; l + 1];
        counts[l] = self.config.warmup_for(l);
        if let Err(e) = self.sample(&counts) {
            self.accs.pop();
            return Err(e);
        }
        self.accs[l].iter = 1;
        Ok(())
    }

    fn report(&self, status: RunStatus, iterations: usize) -> Result<RunReport> {
        let bias = bias_series(&self.accs)?;
        let mean = mlmc_mean(&self.accs)?;
        let mut levels = Vec::with_capacity(self.accs.len());
        for (acc, b) in self.accs.iter().zip(&bias) {
            levels.push(LevelSummary {
                spec: acc.level,
                m_tot: acc.m_tot,
                iter: acc.iter,
                sigma2: acc.level_variance()?,
                w_hat: acc.work_stats(self.config.work_measure)?.0,
                bias: *b,
                work_units: acc.work_units.mean * acc.work_units.n as f64,
                work_seconds: acc.work_seconds.mean * acc.work_seconds.n as f64,
            });
        }
        Ok(RunReport {
            status,
            epsilon: self.config.epsilon,
            alpha: self.config.alpha,
            iterations,
            levels,
            rows: self.rows.clone(),
            eps_stat: self.eps_stat()?,
            bias_estimate: bias_bound(&bias, self.rho())?,
            bias_series: bias,
            total_work_units: self.units,
            total_seconds: self.seconds,
            levels_added: self.added.clone(),
            mean_norm: mean.l2_norm(),
            mean_field: Some(mean),
            accumulators: self.accs.clone(),
        })
    }

    fn partial(&self, error: Error, iterations: usize) -> RunFailure {
        let partial = self
            .report(RunStatus::BiasUncertified, iterations)
            .ok()
            .map(Box::new);
        RunFailure { error, partial }
    }
}

/// Runs the adaptive algorithm starting with levels `0..=l_start`.
pub fn run<S: Sampler>(config: &EngineConfig, sampler: &mut S, l_start: usize) -> std::result::Result<RunReport, RunFailure> {
    config.validate()?;
    if l_start + 1 > config.max_levels {
        return Err(Error::config("engine.max_levels", format!("must allow the {} starting levels", l_start + 1)).into());
    }
    let mut engine = Engine::new(config, sampler);
    // the decay factor must be valid before any work is spent
    bias_bound(&[], engine.rho())?;
    for l in 0..=l_start {
        if let Err(e) = engine.warm_up(l) {
            return Err(engine.partial(e, 0));
        }
    }
    let eps = config.epsilon;
    for iter in 1..=config.max_iterations {
        if let Err(e) = engine.iterate(iter) {
            return Err(engine.partial(e, iter));
        }
        let stat = match engine.eps_stat() {
            Ok(s) => s,
            Err(e) => return Err(engine.partial(e, iter)),
        };
        if stat > 0.5 * eps * (1.0 + 1e-12) {
            continue;
        }
        let bias = match bias_series(&engine.accs).and_then(|b| bias_bound(&b, engine.rho())) {
            Ok(b) => b,
            Err(e) => return Err(engine.partial(e, iter)),
        };
        if engine.accs.len() >= 3 && bias <= 0.5 * eps {
            return engine.report(RunStatus::Certified, iter).map_err(Into::into);
        }
        let next = engine.accs.len();
        if next >= config.max_levels {
            return engine.report(RunStatus::BiasUncertified, iter).map_err(Into::into);
        }
        if let Err(e) = engine.warm_up(next) {
            return Err(engine.partial(e, iter));
        }
        engine.added.push(next);
    }
    let e = Error::Numerical(format!("no termination within {} iterations", config.max_iterations));
    Err(engine.partial(e, config.max_iterations))
}

/// Samples exactly `counts[l]` differences on every level without the
/// adaptive loop and returns the accumulators.
pub fn run_fixed<S: Sampler>(config: &EngineConfig, sampler: &mut S, counts: &[u64]) -> Result<Vec<LevelAccumulator>> {
    if counts.is_empty() {
        return Err(Error::contract("need at least one level"));
    }
    if config.batch_size == 0 {
        return Err(Error::config("engine.batch_size", "must be at least 1"));
    }
    let mut engine = Engine::new(config, sampler);
    for l in 0..counts.len() {
        engine.open_level(l)?;
    }
    engine.sample(counts)?;
    Ok(engine.accs)
}

/// Telescoped estimate `sum_l mean(U_l - U_(l-1))` on the finest layout.
pub fn mlmc_mean(accs: &[LevelAccumulator]) -> Result<Field> {
    let last = accs.last().ok_or_else(|| Error::state("no levels to combine"))?;
    let q = accs.iter().map(|a| a.q).max().unwrap_or(last.q);
    let mut total = Field::zeros(last.mesh, q);
    for acc in accs {
        let term = acc.mean_field()?.lift_to(last.mesh, q)?;
        for (t, v) in total.values.iter_mut().zip(&term.values) {
            *t += v;
        }
    }
    Ok(total)
}
