//! Nodal discontinuous Galerkin solver for a periodic scalar
//! advection-diffusion model problem.

pub mod basis;
pub mod field;
pub mod mesh;
pub mod problem;
pub mod solver;

pub use basis::{build_basis, Basis, MAX_DEGREE};
pub use field::{l2_norm, DrawTag, Field};
pub use mesh::{element_map, Mesh2D, NestingMap};
pub use problem::{exact_state, source_term, Forcing, ProblemSpec};
pub use solver::{advance, cfl_timestep, solve_sample, DgSolver, SolveWork};
