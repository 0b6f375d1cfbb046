//! `convergence`: pilot samples on a fixed hierarchy and fitted rates.

use std::path::Path;

use hpmlmc::engine::{run_fixed, DgSampler};
use hpmlmc::estimators::fit_rate;
use hpmlmc::Error;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{create_dir, write_csv, write_json};

pub const CONVERGENCE_HEADER: [&str; 11] = [
    "level",
    "n_per_dim",
    "q",
    "h",
    "q_tilde",
    "h_pow_q_tilde",
    "dofs",
    "samples",
    "bias",
    "sigma2",
    "w_hat",
];

/// Pilot statistics of one level. `bias` is the norm of the mean level
/// difference (of the mean itself on level 0).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRates {
    pub level: usize,
    pub n_per_dim: usize,
    pub q: usize,
    pub h: f64,
    pub q_tilde: usize,
    pub h_pow_q_tilde: f64,
    pub dofs: usize,
    pub samples: u64,
    pub bias: f64,
    pub sigma2: f64,
    pub w_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeTag {
    A,
    B,
    #[serde(rename = "borderline")]
    Borderline,
}

/// Sign of `kappa2 q~0 - gamma1`.
pub fn regime_tag(kappa2: f64, q0_tilde: f64, gamma1: f64) -> RegimeTag {
    let d = kappa2 * q0_tilde - gamma1;
    if d > 0.0 {
        RegimeTag::A
    } else if d < 0.0 {
        RegimeTag::B
    } else {
        RegimeTag::Borderline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rates {
    /// Slope of the bias against `h^q~` over levels 1 and up.
    pub kappa1: f64,
    /// Slope of the variance against `h^q~` over the last three levels.
    pub kappa2: f64,
    /// Twice the slope of the mean work against the DOF count.
    pub gamma1: f64,
    pub q0_tilde: f64,
    pub kappa2_q0_tilde: f64,
    pub regime: RegimeTag,
}

pub fn fit_rates(rows: &[LevelRates]) -> hpmlmc::Result<Rates> {
    if rows.len() < 3 {
        return Err(Error::config(
            "convergence.levels",
            format!("need at least 3 levels, got {}", rows.len()),
        ));
    }
    let fine = &rows[1..];
    let x: Vec<f64> = fine.iter().map(|r| r.h_pow_q_tilde).collect();
    let bias: Vec<f64> = fine.iter().map(|r| r.bias).collect();
    let var: Vec<f64> = fine.iter().map(|r| r.sigma2).collect();
    let kappa1 = fit_rate(&x, &bias, x.len())?.slope;
    let kappa2 = fit_rate(&x, &var, x.len().min(3))?.slope;
    let dofs: Vec<f64> = rows.iter().map(|r| r.dofs as f64).collect();
    let work: Vec<f64> = rows.iter().map(|r| r.w_hat).collect();
    let gamma1 = 2.0 * fit_rate(&dofs, &work, dofs.len())?.slope;
    let q0_tilde = rows[0].q_tilde as f64;
    Ok(Rates {
        kappa1,
        kappa2,
        gamma1,
        q0_tilde,
        kappa2_q0_tilde: kappa2 * q0_tilde,
        regime: regime_tag(kappa2, q0_tilde, gamma1),
    })
}

/// Samples `convergence.pilot_samples` on every level of the pilot
/// hierarchy.
pub fn pilot(cfg: &RunConfig) -> hpmlmc::Result<Vec<LevelRates>> {
    let n = cfg.convergence.levels;
    if n < 3 {
        return Err(Error::config("convergence.levels", format!("need at least 3 levels, got {n}")));
    }
    let engine = cfg.engine_config();
    let hierarchy = cfg.hierarchy(n - 1)?;
    let mut sampler = DgSampler::new(hierarchy.clone(), cfg.problem_spec()?, &cfg.params, engine.seed)?;
    let pilot = &cfg.convergence.pilot_samples;
    let counts: Vec<u64> = (0..n).map(|l| pilot[l.min(pilot.len() - 1)]).collect();
    let accs = run_fixed(&engine, &mut sampler, &counts)?;
    accs.iter()
        .enumerate()
        .map(|(l, acc)| {
            let spec = acc.level;
            let h = hierarchy.h(l);
            Ok(LevelRates {
                level: l,
                n_per_dim: spec.n_per_dim,
                q: spec.q,
                h,
                q_tilde: spec.q_tilde(),
                h_pow_q_tilde: h.powi(spec.q_tilde() as i32),
                dofs: spec.dofs(),
                samples: acc.m_tot,
                bias: acc.mean_field()?.l2_norm(),
                sigma2: acc.level_variance()?,
                w_hat: acc.work_units.mean,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Document<'a> {
    rates: &'a Rates,
    levels: &'a [LevelRates],
}

pub fn execute(cfg: &RunConfig, dir: &Path) -> anyhow::Result<Rates> {
    let rows = pilot(cfg)?;
    let rates = fit_rates(&rows)?;
    create_dir(dir)?;
    write_csv(&dir.join("convergence.csv"), &CONVERGENCE_HEADER, &rows)?;
    write_json(&dir.join("rates.json"), &Document { rates: &rates, levels: &rows })?;
    Ok(rates)
}
