//! Adaptive multilevel Monte Carlo: allocation, confidence bounds, the
//! sampling loop and the a-priori planner.

pub mod allocation;
pub mod confidence;
pub mod planner;
pub mod reference;
pub mod run;
pub mod sampler;

pub use allocation::{
    blended_target, optimal_samples, optimal_samples_real, samples_lower, should_add_level, zeta,
};
pub use confidence::{sigma_lower, sigma_lower_from, work_bounds, work_bounds_from};
pub use planner::{apriori_plan, tail_sum, Plan, PlanConstants, Regime};
pub use reference::reference_mean;
pub use run::{mlmc_mean, run, run_fixed, EngineConfig, IterationRow, RunFailure, RunReport, RunStatus};
pub use sampler::{DgSampler, HierarchyConstants, LevelSample, Sampler};
