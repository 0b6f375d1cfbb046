//! `allocate`: sample numbers for given level statistics, without solving.

use std::path::Path;

use anyhow::{bail, Context};
use hpmlmc::engine::{apriori_plan, optimal_samples, optimal_samples_real, samples_lower, sigma_lower_from, Plan};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{create_dir, write_csv, write_json};

pub const ALLOCATION_HEADER: [&str; 8] = ["level", "sigma2", "w", "M_real", "M_hat", "M_tot", "M_lower", "M_plan"];

/// One row of the input table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelInput {
    pub level: usize,
    pub sigma2: f64,
    pub w: f64,
    #[serde(default)]
    pub m_tot: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationRow {
    pub level: usize,
    pub sigma2: f64,
    pub w: f64,
    pub m_real: f64,
    pub m_hat: u64,
    pub m_tot: Option<u64>,
    pub m_lower: Option<f64>,
    pub m_plan: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub epsilon: f64,
    /// `eps^2/4 - sum sigma2 / M_hat`; never negative.
    pub residual: f64,
    pub total_work: f64,
    pub rows: Vec<AllocationRow>,
    pub plan: Option<Plan>,
}

/// Reads `level,sigma2,w[,m_tot]` rows. Levels must be `0, 1, ...` in order.
pub fn read_levels(text: &str) -> anyhow::Result<Vec<LevelInput>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, record) in reader.deserialize::<LevelInput>().enumerate() {
        let row = k + 1;
        let r = record.with_context(|| format!("row {row} is malformed"))?;
        if r.level != k {
            bail!("row {row}: expected level {k}, got {}", r.level);
        }
        if !(r.sigma2 >= 0.0 && r.sigma2.is_finite()) {
            bail!("row {row}: sigma2 must be finite and >= 0, got {}", r.sigma2);
        }
        if !(r.w > 0.0 && r.w.is_finite()) {
            bail!("row {row}: w must be positive and finite, got {}", r.w);
        }
        if r.m_tot.is_some_and(|m| m < 2) {
            bail!("row {row}: m_tot must be at least 2");
        }
        out.push(r);
    }
    if out.is_empty() {
        bail!("no level rows");
    }
    Ok(out)
}

pub fn allocate(cfg: &RunConfig, levels: &[LevelInput]) -> anyhow::Result<Allocation> {
    let eps = cfg.engine.epsilon;
    let s2: Vec<f64> = levels.iter().map(|l| l.sigma2).collect();
    let w: Vec<f64> = levels.iter().map(|l| l.w).collect();
    let real = optimal_samples_real(&s2, &w, eps)?;
    let hat = optimal_samples(&s2, &w, eps)?;

    // known work, so only the variance bound is random
    let lower: Option<Vec<f64>> = if levels.iter().all(|l| l.m_tot.is_some()) {
        let alpha = cfg.engine.alpha_per_bound(levels.len());
        let sl = levels
            .iter()
            .map(|l| sigma_lower_from(l.m_tot.unwrap_or(0), l.sigma2, None, 2.0 * alpha))
            .collect::<hpmlmc::Result<Vec<f64>>>()?;
        Some(
            (0..levels.len())
                .map(|l| samples_lower(&sl, &w, w[l], eps, l))
                .collect::<hpmlmc::Result<_>>()?,
        )
    } else {
        None
    };

    let plan = cfg.plan.as_ref().map(|c| apriori_plan(eps, c)).transpose()?;
    let rows = levels
        .iter()
        .enumerate()
        .map(|(l, input)| AllocationRow {
            level: l,
            sigma2: input.sigma2,
            w: input.w,
            m_real: real[l],
            m_hat: hat[l],
            m_tot: input.m_tot,
            m_lower: lower.as_ref().map(|v| v[l]),
            m_plan: plan.as_ref().and_then(|p| p.samples.get(l).copied()),
        })
        .collect();
    let spent: f64 = s2.iter().zip(&hat).map(|(s, &m)| s / m as f64).sum();
    Ok(Allocation {
        epsilon: eps,
        residual: eps * eps / 4.0 - spent,
        total_work: w.iter().zip(&hat).map(|(w, &m)| w * m as f64).sum(),
        rows,
        plan,
    })
}

pub fn execute(cfg: &RunConfig, sigma_csv: &Path, dir: &Path) -> anyhow::Result<Allocation> {
    let text = std::fs::read_to_string(sigma_csv).with_context(|| format!("cannot read {}", sigma_csv.display()))?;
    let levels = read_levels(&text).with_context(|| format!("in {}", sigma_csv.display()))?;
    let a = allocate(cfg, &levels)?;
    create_dir(dir)?;
    write_csv(&dir.join("allocation.csv"), &ALLOCATION_HEADER, &a.rows)?;
    write_json(&dir.join("allocation.json"), &a)?;
    Ok(a)
}

/// Human-readable summary for the terminal.
pub fn render(a: &Allocation) -> String {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    let mut s = format!("{:>5} {:>12} {:>12} {:>10} {:>12} {:>10}\n", "level", "sigma2", "w", "M_hat", "M_lower", "M_plan");
    for r in &a.rows {
        s += &format!(
            "{:>5} {:>12.4e} {:>12.4e} {:>10} {:>12} {:>10}\n",
            r.level,
            r.sigma2,
            r.w,
            r.m_hat,
            opt(r.m_lower.map(|m| format!("{m:.2}"))),
            opt(r.m_plan.map(|m| m.to_string())),
        );
    }
    s += &format!("residual eps^2/4 - sum sigma2/M_hat = {:.6e}\n", a.residual);
    if let Some(p) = &a.plan {
        s += &format!("a-priori plan: L = {} (root {:.3}), regime {:?}\n", p.levels, p.l_bar, p.regime);
    }
    s
}
