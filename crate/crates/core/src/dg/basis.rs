use crate::error::{Error, Result};
use crate::quadrature::{barycentric_weights, derivative_matrix, gauss_legendre, lagrange_row};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 12;

/// Nodal Lagrange basis on the Gauss–Legendre points of [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub q: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub bary: Vec<f64>,
    /// `diff_matrix[i * (q+1) + j] = l_j'(x_i)`.
    pub diff_matrix: Vec<f64>,
    /// Cardinal functions evaluated at the left end of the interval.
    pub left: Vec<f64>,
    /// Cardinal functions evaluated at the right end of the interval.
    pub right: Vec<f64>,
}

impl Basis {
    pub fn new(q: usize) -> Result<Self> {
        if q > MAX_DEGREE {
            return Err(Error::config(
                "q",
                format!("polynomial degree {q} exceeds the supported maximum {MAX_DEGREE}"),
            ));
        }
        Ok(Self::build(q))
    }

    /// Builds a nodal set without the degree cap, for quadrature-only use.
    pub(crate) fn build(q: usize) -> Self {
        let (nodes, weights) = gauss_legendre(q + 1);
        let bary = barycentric_weights(&nodes);
        let diff_matrix = derivative_matrix(&nodes, &bary);
        let left = lagrange_row(&nodes, &bary, -1.0);
        let right = lagrange_row(&nodes, &bary, 1.0);
        Basis {
            q,
            nodes,
            weights,
            bary,
            diff_matrix,
            left,
            right,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.q + 1
    }

    /// Row of cardinal-function values at reference coordinate `xi`.
    pub fn eval_row(&self, xi: f64) -> Vec<f64> {
        lagrange_row(&self.nodes, &self.bary, xi)
    }

    /// Applies the differentiation matrix to nodal samples.
    pub fn differentiate(&self, samples: &[f64]) -> Vec<f64> {
        let p = self.n_nodes();
        assert_eq!(samples.len(), p);
        (0..p)
            .map(|i| {
                self.diff_matrix[i * p..(i + 1) * p]
                    .iter()
                    .zip(samples)
                    .map(|(d, s)| d * s)
                    .sum()
            })
            .collect()
    }
}

/// Builds the nodal basis of degree `q`.
pub fn build_basis(q: usize) -> Result<Basis> {
    Basis::new(q)
}
