//! Deterministic quadrature reference for the mean field.

use rayon::prelude::*;

use crate::dg::{DgSolver, Field};
use crate::error::Result;
use crate::random::{reference_quadrature, ParamSpec};

/// Nodes summed sequentially inside one parallel task.
const CHUNK: usize = 8;

/// `sum_k w_k U(y_k)` over a tensor quadrature of the parameter space,
/// every solve done with `solver`.
pub fn reference_mean(solver: &DgSolver, params: &[ParamSpec], nodes_per_dim: usize) -> Result<Field> {
    let nodes = reference_quadrature(params, nodes_per_dim)?;
    let partial: Vec<Vec<f64>> = nodes
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut sum = vec![0.0; solver.mesh.n_elements() * (solver.q() + 1).pow(2)];
            for (y, w) in chunk {
                let (u, _) = solver.solve(y)?;
                for (s, v) in sum.iter_mut().zip(&u.values) {
                    *s += w * v;
                }
            }
            Ok(sum)
        })
        .collect::<Result<_>>()?;
    let mut total = Field::zeros(solver.mesh, solver.q());
    for part in partial {
        for (t, v) in total.values.iter_mut().zip(&part) {
            *t += v;
        }
    }
    Ok(total)
}
