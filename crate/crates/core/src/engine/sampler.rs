//! Sources of coupled level differences.

use crate::dg::{DgSolver, DrawTag, Mesh2D, ProblemSpec};
use crate::error::{Error, Result};
use crate::hierarchy::{pair_difference, DiffField, Hierarchy, LevelSpec};
use crate::random::{draw_validated, validate_specs, Distribution, ParamSpec};

/// One coupled sample `U_l - U_{l-1}` and what it cost.
#[derive(Debug, Clone)]
pub struct LevelSample {
    pub diff: DiffField,
    pub units: f64,
    pub seconds: f64,
}

/// Constants of the level construction used by the bias extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyConstants {
    pub h0: f64,
    pub lambda: f64,
    pub beta: f64,
    pub q0_tilde: f64,
}

/// Produces coupled differences for the engine. `sample` must be a pure
/// function of `(level, index)` so that batches can run in any order.
pub trait Sampler: Sync {
    /// Number of levels currently available.
    fn n_levels(&self) -> usize;

    /// Makes one more level available.
    fn add_level(&mut self) -> Result<()>;

    /// Level spec, storage mesh and storage degree of level-`l` differences.
    fn layout(&self, l: usize) -> Result<(LevelSpec, Mesh2D, usize)>;

    fn constants(&self) -> HierarchyConstants;

    fn sample(&self, l: usize, index: u64) -> Result<LevelSample>;
}

/// DG solves of the manufactured problem on a level hierarchy.
#[derive(Debug, Clone)]
pub struct DgSampler {
    pub hierarchy: Hierarchy,
    pub problem: ProblemSpec,
    pub seed: u64,
    dists: Vec<Distribution>,
    solvers: Vec<DgSolver>,
    /// Test hook: draw every sample from this level's stream.
    shared_stream: Option<usize>,
}

impl DgSampler {
    pub fn new(hierarchy: Hierarchy, problem: ProblemSpec, params: &[ParamSpec], seed: u64) -> Result<Self> {
        problem.validate()?;
        let dists = validate_specs(params)?;
        let needed = problem.amplitude_index.max(problem.frequency_index) + 1;
        if dists.len() < needed {
            return Err(Error::config(
                "params",
                format!("the problem reads parameter {} but only {} are given", needed - 1, dists.len()),
            ));
        }
        if problem.domain_lower != hierarchy.domain_lower || problem.domain_side != hierarchy.domain_side {
            return Err(Error::config("problem.domain", "hierarchy and problem use different domains"));
        }
        let mut out = DgSampler {
            hierarchy,
            problem,
            seed,
            dists,
            solvers: Vec::new(),
            shared_stream: None,
        };
        for l in 0..out.hierarchy.levels.len() {
            out.build_solver(l)?;
        }
        Ok(out)
    }

    /// Every level reuses the draws of `level`, so all levels see the same
    /// parameter sequence.
    pub fn with_shared_stream(mut self, level: usize) -> Self {
        self.shared_stream = Some(level);
        self
    }

    fn build_solver(&mut self, l: usize) -> Result<()> {
        let solver = DgSolver::new(self.hierarchy.mesh(l)?, self.hierarchy.levels[l].q, &self.problem)?;
        self.solvers.push(solver);
        Ok(())
    }

    pub fn solver(&self, l: usize) -> Result<&DgSolver> {
        self.solvers
            .get(l)
            .ok_or_else(|| Error::state(format!("level {l} is not part of the hierarchy")))
    }

    /// Parameter vector of sample `index` on `level`.
    pub fn parameters(&self, level: usize, index: u64) -> Vec<f64> {
        let stream = self.shared_stream.unwrap_or(level);
        draw_validated(self.seed, stream, index, &self.dists).y
    }

    fn solve_tagged(&self, l: usize, stream: usize, index: u64, y: &[f64]) -> Result<(crate::dg::Field, f64, f64)> {
        let (field, work) = self.solver(l)?.solve(y)?;
        let tag = DrawTag {
            seed: self.seed,
            level: stream,
            index,
        };
        Ok((field.with_origin(tag), work.units, work.seconds))
    }
}

impl Sampler for DgSampler {
    fn n_levels(&self) -> usize {
        self.hierarchy.levels.len()
    }

    fn add_level(&mut self) -> Result<()> {
        let next = self.hierarchy.levels.len();
        self.hierarchy.extend_to(next)?;
        self.build_solver(next)
    }

    fn layout(&self, l: usize) -> Result<(LevelSpec, Mesh2D, usize)> {
        let spec = *self.hierarchy.level(l)?;
        let (mesh, q) = self.hierarchy.diff_layout(l)?;
        Ok((spec, mesh, q))
    }

    fn constants(&self) -> HierarchyConstants {
        let h = &self.hierarchy;
        HierarchyConstants {
            h0: h.h0,
            lambda: h.lambda as f64,
            beta: h.beta as f64,
            q0_tilde: h.levels[0].q_tilde() as f64,
        }
    }

    fn sample(&self, l: usize, index: u64) -> Result<LevelSample> {
        let stream = self.shared_stream.unwrap_or(l);
        let y = self.parameters(l, index);
        let (fine, mut units, mut seconds) = self.solve_tagged(l, stream, index, &y)?;
        let coarse = if l > 0 {
            let (c, u, s) = self.solve_tagged(l - 1, stream, index, &y)?;
            units += u;
            seconds += s;
            Some(c)
        } else {
            None
        };
        let diff = pair_difference(self.hierarchy.levels[l], &fine, coarse.as_ref())?;
        Ok(LevelSample { diff, units, seconds })
    }
}
