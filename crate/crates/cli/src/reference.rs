//! `reference`: quadrature mean of the solution on one hierarchy level.

use std::path::Path;

use hpmlmc::dg::{DgSolver, Field};
use hpmlmc::engine::reference_mean;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{create_dir, write_field, write_json};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSummary {
    pub level: usize,
    pub n_per_dim: usize,
    pub q: usize,
    pub nodes_per_dim: usize,
    pub norm: f64,
    /// Norm with half the nodes per dimension, when that is at least one.
    pub coarser_nodes_per_dim: Option<usize>,
    pub coarser_norm: Option<f64>,
    pub norm_change: Option<f64>,
}

pub struct Reference {
    pub field: Field,
    pub summary: ReferenceSummary,
}

pub fn compute(cfg: &RunConfig, nodes_per_dim: usize) -> anyhow::Result<Reference> {
    anyhow::ensure!(nodes_per_dim >= 1, "nodes per dimension must be at least 1");
    let level = cfg.reference.level.unwrap_or(cfg.hierarchy.l_start);
    let hierarchy = cfg.hierarchy(level)?;
    let spec = *hierarchy.level(level)?;
    let solver = DgSolver::new(hierarchy.mesh(level)?, spec.q, &cfg.problem_spec()?)?;
    let field = reference_mean(&solver, &cfg.params, nodes_per_dim)?;
    let norm = field.l2_norm();
    let half = nodes_per_dim / 2;
    let coarser_norm = if half >= 1 {
        Some(reference_mean(&solver, &cfg.params, half)?.l2_norm())
    } else {
        None
    };
    Ok(Reference {
        field,
        summary: ReferenceSummary {
            level,
            n_per_dim: spec.n_per_dim,
            q: spec.q,
            nodes_per_dim,
            norm,
            coarser_nodes_per_dim: (half >= 1).then_some(half),
            coarser_norm,
            norm_change: coarser_norm.map(|c| (norm - c).abs()),
        },
    })
}

pub fn execute(cfg: &RunConfig, nodes_per_dim: usize, dir: &Path) -> anyhow::Result<Reference> {
    let r = compute(cfg, nodes_per_dim)?;
    create_dir(dir)?;
    write_json(&dir.join("reference.json"), &r.summary)?;
    write_field(&dir.join("reference_mean.csv"), &r.field)?;
    Ok(r)
}
