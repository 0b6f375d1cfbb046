use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform Cartesian mesh of a periodic square `[lower, lower + side)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mesh2D {
    pub n_per_dim: usize,
    pub lower: f64,
    pub side: f64,
}

impl Mesh2D {
    /// Mesh of the default domain (-1, 1)^2.
    pub fn new(n_per_dim: usize) -> Self {
        Self::on_square(n_per_dim, -1.0, 2.0)
    }

    pub fn on_square(n_per_dim: usize, lower: f64, side: f64) -> Self {
        assert!(n_per_dim >= 1, "a mesh needs at least one element per direction");
        assert!(side > 0.0, "domain side length must be positive");
        Mesh2D {
            n_per_dim,
            lower,
            side,
        }
    }

    pub fn h(&self) -> f64 {
        self.side / self.n_per_dim as f64
    }

    pub fn n_elements(&self) -> usize {
        self.n_per_dim * self.n_per_dim
    }

    pub fn measure(&self) -> f64 {
        self.side * self.side
    }

    /// Element index from its (column, row) position.
    #[inline]
    pub fn element(&self, ex: usize, ey: usize) -> usize {
        ey * self.n_per_dim + ex
    }

    /// Periodic neighbour across a face; `dir` is 0 for x and 1 for y,
    /// `step` is +1 or -1.
    pub fn neighbor(&self, elem: usize, dir: usize, step: isize) -> usize {
        let n = self.n_per_dim as isize;
        let (ex, ey) = ((elem % self.n_per_dim) as isize, (elem / self.n_per_dim) as isize);
        let (ex, ey) = if dir == 0 {
            ((ex + step).rem_euclid(n), ey)
        } else {
            (ex, (ey + step).rem_euclid(n))
        };
        (ey * n + ex) as usize
    }

    /// Physical coordinate of reference point `xi` inside element column `e`.
    #[inline]
    pub fn coord(&self, e: usize, xi: f64) -> f64 {
        self.lower + (e as f64 + 0.5 * (xi + 1.0)) * self.h()
    }

    pub fn same_domain(&self, other: &Mesh2D) -> bool {
        self.lower == other.lower && self.side == other.side
    }
}

/// Nesting relation between a coarse mesh and a uniformly refined one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NestingMap {
    pub coarse: Mesh2D,
    pub fine: Mesh2D,
    pub ratio: usize,
}

/// Where a fine element sits inside its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parent {
    pub element: usize,
    /// Sub-cell offset of the fine element in x and y, each in `0..ratio`.
    pub offset: (usize, usize),
}

impl NestingMap {
    pub fn parent(&self, fine_elem: usize) -> Parent {
        let nf = self.fine.n_per_dim;
        let (fx, fy) = (fine_elem % nf, fine_elem / nf);
        Parent {
            element: self.coarse.element(fx / self.ratio, fy / self.ratio),
            offset: (fx % self.ratio, fy % self.ratio),
        }
    }

    /// Affine map from fine reference coordinate to coarse reference
    /// coordinate for a given sub-cell offset.
    #[inline]
    pub fn to_coarse_ref(&self, offset: usize, xi: f64) -> f64 {
        (xi + 1.0 + 2.0 * offset as f64) / self.ratio as f64 - 1.0
    }

    /// Fine elements owned by a coarse element.
    pub fn children(&self, coarse_elem: usize) -> Vec<usize> {
        let nc = self.coarse.n_per_dim;
        let (cx, cy) = (coarse_elem % nc, coarse_elem / nc);
        let mut out = Vec::with_capacity(self.ratio * self.ratio);
        for ky in 0..self.ratio {
            for kx in 0..self.ratio {
                out.push(self.fine.element(cx * self.ratio + kx, cy * self.ratio + ky));
            }
        }
        out
    }
}

/// Builds the nesting map from `coarse` to `fine`.
pub fn element_map(coarse: &Mesh2D, fine: &Mesh2D) -> Result<NestingMap> {
    if !coarse.same_domain(fine) {
        return Err(Error::contract("meshes cover different domains"));
    }
    if !fine.n_per_dim.is_multiple_of(coarse.n_per_dim) {
        return Err(Error::contract(format!(
            "meshes are not nested: {} elements per direction is not a multiple of {}",
            fine.n_per_dim, coarse.n_per_dim
        )));
    }
    Ok(NestingMap {
        coarse: *coarse,
        fine: *fine,
        ratio: fine.n_per_dim / coarse.n_per_dim,
    })
}
