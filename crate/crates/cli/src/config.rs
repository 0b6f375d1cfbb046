//! Run configuration file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use hpmlmc::dg::problem::Forcing;
use hpmlmc::dg::ProblemSpec;
use hpmlmc::engine::{apriori_plan, EngineConfig, PlanConstants};
use hpmlmc::hierarchy::{Hierarchy, HierarchyKind};
use hpmlmc::random::{benchmark_params, validate_specs, ParamSpec};
use hpmlmc::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default = "benchmark_params")]
    pub params: Vec<ParamSpec>,
    pub hierarchy: HierarchyConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    /// Constants for the a-priori schedule printed by `allocate`.
    #[serde(default)]
    pub plan: Option<PlanConstants>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub advection: [f64; 2],
    pub diffusion: f64,
    pub final_time: f64,
    pub domain: DomainConfig,
    pub cfl_safety: f64,
    pub forcing: Forcing,
    /// Name of the parameter used as amplitude.
    pub amplitude: String,
    /// Name of the parameter used as frequency.
    pub frequency: String,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let p = ProblemSpec::default();
        ProblemConfig {
            advection: p.advection,
            diffusion: p.diffusion,
            final_time: p.final_time,
            domain: DomainConfig {
                lower: p.domain_lower,
                side: p.domain_side,
            },
            cfl_safety: p.cfl_safety,
            forcing: p.forcing,
            amplitude: "A".into(),
            frequency: "f".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: f64,
    pub side: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub kind: HierarchyKind,
    pub base_n: usize,
    pub base_q: usize,
    /// Index of the finest starting level.
    #[serde(default = "default_l_start", alias = "L_start")]
    pub l_start: usize,
    #[serde(default = "default_lambda")]
    pub lambda: usize,
    #[serde(default = "default_beta")]
    pub beta: usize,
}

fn default_l_start() -> usize {
    2
}

fn default_lambda() -> usize {
    2
}

fn default_beta() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Not echoed into reports so that artifacts do not depend on it.
    #[serde(skip_serializing)]
    pub directory: PathBuf,
    pub emit_fields: bool,
    /// Drop wall-clock measurements so artifacts are byte-identical.
    pub bit_reproducible: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("hpmlmc-out"),
            emit_fields: true,
            bit_reproducible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Number of levels in the pilot hierarchy.
    pub levels: usize,
    /// Pilot samples per level; later levels use the last entry.
    pub pilot_samples: Vec<u64>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            levels: 4,
            pilot_samples: vec![50, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub nodes_per_dim: usize,
    /// Level to solve on; defaults to the finest starting level.
    pub level: Option<usize>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            nodes_per_dim: 24,
            level: None,
        }
    }
}

/// Prefixes the key of a configuration error with its section.
fn in_section(section: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { key, message } => Error::config(format!("{section}.{key}"), message),
        other => other,
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("malformed configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Everything that can be checked without solving.
    pub fn validate(&self) -> hpmlmc::Result<()> {
        self.engine.validate()?;
        self.problem_spec()?;
        self.hierarchy(self.hierarchy.l_start)?;
        if self.convergence.pilot_samples.is_empty() || self.convergence.pilot_samples.contains(&0) {
            return Err(Error::config("convergence.pilot_samples", "need positive counts"));
        }
        if self.reference.nodes_per_dim == 0 {
            return Err(Error::config("reference.nodes_per_dim", "must be at least 1"));
        }
        if let Some(p) = &self.plan {
            apriori_plan(self.engine.epsilon, p).map_err(in_section("plan"))?;
        }
        Ok(())
    }

    fn param_index(&self, key: &str, name: &str) -> hpmlmc::Result<usize> {
        self.params
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.index)
            .ok_or_else(|| Error::config(format!("problem.{key}"), format!("no parameter named {name:?}")))
    }

    pub fn problem_spec(&self) -> hpmlmc::Result<ProblemSpec> {
        validate_specs(&self.params)?;
        let p = &self.problem;
        let spec = ProblemSpec {
            advection: p.advection,
            diffusion: p.diffusion,
            final_time: p.final_time,
            amplitude_index: self.param_index("amplitude", &p.amplitude)?,
            frequency_index: self.param_index("frequency", &p.frequency)?,
            forcing: p.forcing,
            cfl_safety: p.cfl_safety,
            domain_lower: p.domain.lower,
            domain_side: p.domain.side,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The configured hierarchy with levels `0..=l_max`.
    pub fn hierarchy(&self, l_max: usize) -> hpmlmc::Result<Hierarchy> {
        let h = &self.hierarchy;
        Hierarchy::new(
            h.kind,
            h.base_n,
            h.base_q,
            l_max,
            h.lambda,
            h.beta,
            self.problem.domain.lower,
            self.problem.domain.side,
        )
        .map_err(in_section("hierarchy"))
    }

    /// Engine settings with the output policy applied.
    pub fn engine_config(&self) -> EngineConfig {
        let mut e = self.engine.clone();
        if self.output.bit_reproducible {
            e.record_seconds = false;
        }
        e
    }
}
