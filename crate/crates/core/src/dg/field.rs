use crate::dg::basis::Basis;
use crate::dg::mesh::{element_map, Mesh2D};
use crate::error::{Error, Result};
use crate::random::SampleDraw;

/// Identifies the random draw a field was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawTag {
    pub seed: u64,
    pub level: usize,
    pub index: u64,
}

impl From<&SampleDraw> for DrawTag {
    fn from(d: &SampleDraw) -> Self {
        DrawTag {
            seed: d.seed,
            level: d.level,
            index: d.index,
        }
    }
}

/// Piecewise polynomial scalar stored by its values at the tensor
/// Gauss–Legendre nodes of every element.
///
/// Layout: `values[(e * p + j) * p + i]` with `p = q + 1`, `i` the x-node and
/// `j` the y-node of element `e = ey * n + ex`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub mesh: Mesh2D,
    pub q: usize,
    pub values: Vec<f64>,
    pub origin: Option<DrawTag>,
}

impl Field {
    pub fn new(mesh: Mesh2D, q: usize, values: Vec<f64>) -> Result<Self> {
        let expected = mesh.n_elements() * (q + 1) * (q + 1);
        if values.len() != expected {
            return Err(Error::contract(format!(
                "field on {}x{} elements of degree {q} needs {expected} values, got {}",
                mesh.n_per_dim,
                mesh.n_per_dim,
                values.len()
            )));
        }
        Ok(Field {
            mesh,
            q,
            values,
            origin: None,
        })
    }

    pub fn zeros(mesh: Mesh2D, q: usize) -> Self {
        let n = mesh.n_elements() * (q + 1) * (q + 1);
        Field {
            mesh,
            q,
            values: vec![0.0; n],
            origin: None,
        }
    }

    /// Nodal interpolation of `f(x1, x2)`.
    pub fn interpolate(mesh: Mesh2D, q: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let nodes = Basis::build(q).nodes;
        let p = q + 1;
        let n = mesh.n_per_dim;
        let mut values = Vec::with_capacity(mesh.n_elements() * p * p);
        for ey in 0..n {
            for ex in 0..n {
                for &eta in &nodes {
                    let x2 = mesh.coord(ey, eta);
                    for &xi in &nodes {
                        values.push(f(mesh.coord(ex, xi), x2));
                    }
                }
            }
        }
        Field {
            mesh,
            q,
            values,
            origin: None,
        }
    }

    pub fn with_origin(mut self, tag: DrawTag) -> Self {
        self.origin = Some(tag);
        self
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.q + 1
    }

    pub fn same_layout(&self, other: &Field) -> bool {
        self.mesh == other.mesh && self.q == other.q
    }

    /// Tensor Gauss weights times the element Jacobian, one per value.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let w = Basis::build(self.q).weights;
        let jac = 0.25 * self.mesh.h() * self.mesh.h();
        let per_elem: Vec<f64> = w
            .iter()
            .flat_map(|wy| w.iter().map(move |wx| wx * wy * jac))
            .collect();
        per_elem
            .iter()
            .copied()
            .cycle()
            .take(self.values.len())
            .collect()
    }

    /// Domain integral evaluated with the nodal quadrature.
    pub fn integral(&self) -> f64 {
        self.quadrature_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// L2(D) norm from the nodal values.
    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.values, &self.quadrature_weights())
    }

    /// L2 distance to a function, integrated with `q + 1 + extra` Gauss
    /// points per direction so the comparison does not sit on the
    /// interpolation nodes.
    pub fn l2_error(&self, exact: impl Fn(f64, f64) -> f64, extra: usize) -> f64 {
        let target_q = self.q + extra;
        let lifted = self
            .lift_to(self.mesh, target_q)
            .expect("a mesh is always nested in itself");
        let diff = Field::interpolate(self.mesh, target_q, exact);
        let values: Vec<f64> = lifted
            .values
            .iter()
            .zip(&diff.values)
            .map(|(a, b)| a - b)
            .collect();
        l2_norm(&values, &lifted.quadrature_weights())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Evaluates the polynomial representation at the Gauss nodes of degree
    /// `target_q` on a nested finer (or identical) mesh. The evaluation is
    /// exact up to round-off.
    pub fn lift_to(&self, target: Mesh2D, target_q: usize) -> Result<Field> {
        let map = element_map(&self.mesh, &target)?;
        if map.ratio == 1 && target_q == self.q {
            let mut out = self.clone();
            out.origin = self.origin;
            return Ok(out);
        }
        let src = Basis::build(self.q);
        let dst_nodes = Basis::build(target_q).nodes;
        let ps = self.q + 1;
        let pt = target_q + 1;

        // eval[k][a * ps + b] = l_b(coarse ref of target node a in sub-cell k)
        let eval: Vec<Vec<f64>> = (0..map.ratio)
            .map(|k| {
                dst_nodes
                    .iter()
                    .flat_map(|&xi| src.eval_row(map.to_coarse_ref(k, xi)))
                    .collect()
            })
            .collect();

        let mut values = vec![0.0; target.n_elements() * pt * pt];
        let mut tmp = vec![0.0; ps * pt];
        for (fe, out) in values.chunks_exact_mut(pt * pt).enumerate() {
            let parent = map.parent(fe);
            let v = &self.values[parent.element * ps * ps..(parent.element + 1) * ps * ps];
            let ex = &eval[parent.offset.0];
            let ey = &eval[parent.offset.1];
            // contract x: tmp[by][ax] = sum_bx ex[ax][bx] v[by][bx]
            for by in 0..ps {
                let row = &v[by * ps..(by + 1) * ps];
                for ax in 0..pt {
                    let e = &ex[ax * ps..(ax + 1) * ps];
                    tmp[by * pt + ax] = e.iter().zip(row).map(|(a, b)| a * b).sum();
                }
            }
            // contract y: out[ay][ax] = sum_by ey[ay][by] tmp[by][ax]
            for ay in 0..pt {
                let e = &ey[ay * ps..(ay + 1) * ps];
                for ax in 0..pt {
                    let mut s = 0.0;
                    for by in 0..ps {
                        s += e[by] * tmp[by * pt + ax];
                    }
                    out[ay * pt + ax] = s;
                }
            }
        }
        Ok(Field {
            mesh: target,
            q: target_q,
            values,
            origin: self.origin,
        })
    }

    /// Physical coordinates of every stored value, in storage order.
    pub fn node_coordinates(&self) -> Vec<(f64, f64)> {
        let nodes = Basis::build(self.q).nodes;
        let n = self.mesh.n_per_dim;
        let mut out = Vec::with_capacity(self.values.len());
        for ey in 0..n {
            for ex in 0..n {
                for &eta in &nodes {
                    for &xi in &nodes {
                        out.push((self.mesh.coord(ex, xi), self.mesh.coord(ey, eta)));
                    }
                }
            }
        }
        out
    }
}

/// `sqrt(sum w v^2)` over quadrature values and weights.
pub fn l2_norm(values: &[f64], weights: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * v * v)
        .sum::<f64>()
        .sqrt()
}
