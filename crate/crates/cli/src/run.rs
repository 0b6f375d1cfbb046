//! `run`: the adaptive estimator on the configured hierarchy.

use std::path::Path;

use hpmlmc::engine::{run, DgSampler, RunFailure, RunReport, RunStatus};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{create_dir, write_csv, write_field, write_json};

pub const ITERATIONS_HEADER: [&str; 13] = [
    "iter",
    "level",
    "M_tot",
    "sigma2",
    "sigma_lower",
    "w_hat",
    "w_lower",
    "w_upper",
    "M_hat",
    "M_lower",
    "M_tilde",
    "cumulative_work_units",
    "cumulative_seconds",
];

pub const SAMPLES_HEADER: [&str; 11] = [
    "level",
    "n_per_dim",
    "q",
    "dofs",
    "M_tot",
    "iter",
    "sigma2",
    "w_hat",
    "bias",
    "work_units",
    "work_seconds",
];

#[derive(Serialize)]
struct LevelRow {
    level: usize,
    n_per_dim: usize,
    q: usize,
    dofs: usize,
    m_tot: u64,
    iter: usize,
    sigma2: f64,
    w_hat: f64,
    bias: f64,
    work_units: f64,
    work_seconds: f64,
}

#[derive(Serialize)]
struct Document<'a> {
    error: Option<String>,
    config: &'a RunConfig,
    report: &'a RunReport,
}

/// Runs the estimator without writing anything.
pub fn estimate(cfg: &RunConfig) -> Result<RunReport, RunFailure> {
    let engine = cfg.engine_config();
    let l_start = cfg.hierarchy.l_start;
    let hierarchy = cfg.hierarchy(l_start)?;
    let mut sampler = DgSampler::new(hierarchy, cfg.problem_spec()?, &cfg.params, engine.seed)?;
    run(&engine, &mut sampler, l_start)
}

pub fn write_artifacts(cfg: &RunConfig, report: &RunReport, error: Option<String>, dir: &Path) -> anyhow::Result<()> {
    create_dir(dir)?;
    let doc = Document {
        error,
        config: cfg,
        report,
    };
    write_json(&dir.join("report.json"), &doc)?;
    write_csv(&dir.join("iterations.csv"), &ITERATIONS_HEADER, &report.rows)?;
    let levels: Vec<LevelRow> = report
        .levels
        .iter()
        .map(|l| LevelRow {
            level: l.spec.level,
            n_per_dim: l.spec.n_per_dim,
            q: l.spec.q,
            dofs: l.spec.dofs(),
            m_tot: l.m_tot,
            iter: l.iter,
            sigma2: l.sigma2,
            w_hat: l.w_hat,
            bias: l.bias,
            work_units: l.work_units,
            work_seconds: l.work_seconds,
        })
        .collect();
    write_csv(&dir.join("samples_per_level.csv"), &SAMPLES_HEADER, &levels)?;
    if cfg.output.emit_fields {
        if let Some(field) = &report.mean_field {
            write_field(&dir.join("mean_field.csv"), field)?;
        }
    }
    Ok(())
}

/// Runs and writes the artifacts. A failed run still writes whatever
/// partial report it produced before the error is returned.
pub fn execute(cfg: &RunConfig, dir: &Path) -> anyhow::Result<RunStatus> {
    match estimate(cfg) {
        Ok(report) => {
            write_artifacts(cfg, &report, None, dir)?;
            Ok(report.status)
        }
        Err(RunFailure { error, partial }) => {
            if let Some(report) = partial {
                write_artifacts(cfg, &report, Some(error.to_string()), dir)?;
            }
            Err(error.into())
        }
    }
}
