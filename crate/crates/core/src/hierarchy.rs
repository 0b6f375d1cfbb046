//! Level hierarchies and coupled level differences.

use serde::{Deserialize, Serialize};

use crate::dg::basis::MAX_DEGREE;
use crate::dg::field::Field;
use crate::dg::mesh::Mesh2D;
use crate::error::{Error, Result};

/// Discretization of one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelSpec {
    pub level: usize,
    pub n_per_dim: usize,
    pub q: usize,
}

impl LevelSpec {
    /// Shifted degree `q + 1`.
    pub fn q_tilde(&self) -> usize {
        self.q + 1
    }

    /// `(n_per_dim (q + 1))^2`.
    pub fn dofs(&self) -> usize {
        let k = self.n_per_dim * (self.q + 1);
        k * k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HierarchyKind {
    H,
    P,
    Hp,
}

impl std::str::FromStr for HierarchyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" => Ok(HierarchyKind::H),
            "p" => Ok(HierarchyKind::P),
            "hp" => Ok(HierarchyKind::Hp),
            other => Err(Error::config("kind", format!("unknown hierarchy kind {other:?}"))),
        }
    }
}

/// Nested sequence of levels built from a construction rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub kind: HierarchyKind,
    pub levels: Vec<LevelSpec>,
    /// Effective mesh ratio per level (1 for p-hierarchies).
    pub lambda: usize,
    /// Effective degree increment per level (0 for h-hierarchies).
    pub beta: usize,
    /// Coarsest element size.
    pub h0: f64,
    pub domain_lower: f64,
    pub domain_side: f64,
}

/// Builds levels `0..=l_max` on the default domain (-1, 1)^2.
pub fn build_hierarchy(
    kind: HierarchyKind,
    base_n: usize,
    base_q: usize,
    l_max: usize,
    lambda: usize,
    beta: usize,
) -> Result<Hierarchy> {
    Hierarchy::new(kind, base_n, base_q, l_max, lambda, beta, -1.0, 2.0)
}

impl Hierarchy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: HierarchyKind,
        base_n: usize,
        base_q: usize,
        l_max: usize,
        lambda: usize,
        beta: usize,
        domain_lower: f64,
        domain_side: f64,
    ) -> Result<Self> {
        if base_n < 2 {
            return Err(Error::config("base_n", format!("must be at least 2, got {base_n}")));
        }
        if !(domain_side > 0.0 && domain_side.is_finite() && domain_lower.is_finite()) {
            return Err(Error::config("domain", "side must be positive and finite"));
        }
        let refines_h = matches!(kind, HierarchyKind::H | HierarchyKind::Hp);
        let refines_p = matches!(kind, HierarchyKind::P | HierarchyKind::Hp);
        if refines_h && lambda < 2 {
            return Err(Error::config("lambda", format!("must be at least 2 for {kind:?} hierarchies, got {lambda}")));
        }
        if refines_p && beta < 1 {
            return Err(Error::config("beta", format!("must be at least 1 for {kind:?} hierarchies, got {beta}")));
        }
        let mut out = Hierarchy {
            kind,
            levels: Vec::new(),
            lambda: if refines_h { lambda } else { 1 },
            beta: if refines_p { beta } else { 0 },
            h0: domain_side / base_n as f64,
            domain_lower,
            domain_side,
        };
        out.levels.push(LevelSpec {
            level: 0,
            n_per_dim: base_n,
            q: base_q,
        });
        if base_q > MAX_DEGREE {
            return Err(Error::config(
                "base_q",
                format!("degree {base_q} exceeds the supported maximum {MAX_DEGREE}"),
            ));
        }
        out.extend_to(l_max)?;
        Ok(out)
    }

    /// Index of the finest level.
    pub fn finest(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> Result<&LevelSpec> {
        self.levels
            .get(l)
            .ok_or_else(|| Error::state(format!("level {l} is not part of the hierarchy")))
    }

    /// Specification of level `l` by the construction rule, whether or not
    /// it has been added yet.
    pub fn spec_for(&self, l: usize) -> Result<LevelSpec> {
        let base = self.levels[0];
        let q = base.q + self.beta * l;
        if q > MAX_DEGREE {
            return Err(Error::config(
                "beta",
                format!("level {l} would need degree {q}, above the supported maximum {MAX_DEGREE}"),
            ));
        }
        let factor = (self.lambda as u64)
            .checked_pow(l as u32)
            .and_then(|f| f.checked_mul(base.n_per_dim as u64))
            .filter(|&n| n <= 1 << 20)
            .ok_or_else(|| Error::config("lambda", format!("level {l} mesh size overflows")))?;
        Ok(LevelSpec {
            level: l,
            n_per_dim: factor as usize,
            q,
        })
    }

    /// Appends levels until `l_max` exists.
    pub fn extend_to(&mut self, l_max: usize) -> Result<()> {
        while self.levels.len() <= l_max {
            let next = self.spec_for(self.levels.len())?;
            self.levels.push(next);
        }
        Ok(())
    }

    /// Element size of level `l`, `h0 lambda^-l`.
    pub fn h(&self, l: usize) -> f64 {
        self.domain_side / self.spec_for_unchecked(l).n_per_dim as f64
    }

    fn spec_for_unchecked(&self, l: usize) -> LevelSpec {
        self.levels.get(l).copied().unwrap_or_else(|| {
            let base = self.levels[0];
            LevelSpec {
                level: l,
                n_per_dim: base.n_per_dim * self.lambda.pow(l as u32),
                q: base.q + self.beta * l,
            }
        })
    }

    pub fn mesh(&self, l: usize) -> Result<Mesh2D> {
        let spec = self.level(l)?;
        Ok(Mesh2D::on_square(spec.n_per_dim, self.domain_lower, self.domain_side))
    }

    /// Mesh and degree on which level-`l` differences are stored: the fine
    /// mesh with enough nodes to represent both polynomials exactly.
    pub fn diff_layout(&self, l: usize) -> Result<(Mesh2D, usize)> {
        let fine = self.level(l)?;
        let q = if l == 0 {
            fine.q
        } else {
            fine.q.max(self.level(l - 1)?.q)
        };
        Ok((self.mesh(l)?, q))
    }
}

/// `U_l - U_{l-1}` for one coupled sample, stored on the fine level's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffField {
    pub level: LevelSpec,
    pub field: Field,
}

impl DiffField {
    pub fn weights(&self) -> Vec<f64> {
        self.field.quadrature_weights()
    }

    pub fn l2_norm(&self) -> f64 {
        self.field.l2_norm()
    }
}

/// Evaluates both solutions on the fine mesh at `max(q_l, q_{l-1}) + 1`
/// Gauss nodes per direction and subtracts. With no coarse field the result
/// is the fine field itself.
pub fn pair_difference(level: LevelSpec, fine: &Field, coarse: Option<&Field>) -> Result<DiffField> {
    if fine.mesh.n_per_dim != level.n_per_dim || fine.q != level.q {
        return Err(Error::contract(format!(
            "fine field ({}, {}) does not match level {} ({}, {})",
            fine.mesh.n_per_dim, fine.q, level.level, level.n_per_dim, level.q
        )));
    }
    let Some(coarse) = coarse else {
        return Ok(DiffField {
            level,
            field: fine.clone(),
        });
    };
    if fine.origin != coarse.origin {
        return Err(Error::contract(format!(
            "coupled fields come from different draws: {:?} vs {:?}",
            fine.origin, coarse.origin
        )));
    }
    let q = fine.q.max(coarse.q);
    let f = fine.lift_to(fine.mesh, q)?;
    let c = coarse.lift_to(fine.mesh, q)?;
    let values = f.values.iter().zip(&c.values).map(|(a, b)| a - b).collect();
    Ok(DiffField {
        level,
        field: Field {
            mesh: fine.mesh,
            q,
            values,
            origin: fine.origin,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::field::DrawTag;

    fn table(h: &Hierarchy) -> (Vec<usize>, Vec<usize>) {
        (
            h.levels.iter().map(|l| l.n_per_dim * l.n_per_dim).collect(),
            h.levels.iter().map(|l| l.q).collect(),
        )
    }

    #[test]
    fn table_hierarchies() {
        let hp = build_hierarchy(HierarchyKind::Hp, 4, 3, 3, 2, 1).unwrap();
        assert_eq!(table(&hp), (vec![16, 64, 256, 1024], vec![3, 4, 5, 6]));
        let h = build_hierarchy(HierarchyKind::H, 4, 5, 3, 2, 1).unwrap();
        assert_eq!(table(&h), (vec![16, 64, 256, 1024], vec![5, 5, 5, 5]));
        let p = build_hierarchy(HierarchyKind::P, 16, 3, 3, 2, 1).unwrap();
        assert_eq!(table(&p), (vec![256; 4], vec![3, 4, 5, 6]));
    }

    #[test]
    fn dofs_strictly_increase() {
        for kind in [HierarchyKind::H, HierarchyKind::P, HierarchyKind::Hp] {
            let h = build_hierarchy(kind, 2, 1, 4, 2, 1).unwrap();
            assert!(h.levels.windows(2).all(|w| w[0].dofs() < w[1].dofs()), "{kind:?}");
        }
    }

    #[test]
    fn validation_names_the_key() {
        let err = build_hierarchy(HierarchyKind::Hp, 4, 3, 3, 2, 0).unwrap_err();
        assert!(err.to_string().contains("beta"));
        let err = build_hierarchy(HierarchyKind::H, 4, 3, 3, 1, 1).unwrap_err();
        assert!(err.to_string().contains("lambda"));
        assert!(build_hierarchy(HierarchyKind::P, 1, 3, 3, 2, 1).is_err());
        let err = build_hierarchy(HierarchyKind::P, 4, 10, 3, 2, 1).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn extension_follows_rule() {
        let mut h = build_hierarchy(HierarchyKind::Hp, 4, 1, 2, 2, 1).unwrap();
        h.extend_to(4).unwrap();
        assert_eq!(h.levels[4], LevelSpec { level: 4, n_per_dim: 64, q: 5 });
        assert_eq!(h.h0, 0.5);
        assert_eq!(h.h(3), 2.0 / 32.0);
    }

    #[test]
    fn difference_of_injected_polynomial_vanishes() {
        let h = build_hierarchy(HierarchyKind::Hp, 2, 2, 1, 3, 1).unwrap();
        let poly = |x: f64, y: f64| 0.3 - x * y + 2.0 * x * x;
        let coarse = Field::interpolate(h.mesh(0).unwrap(), 2, poly);
        let fine = Field::interpolate(h.mesh(1).unwrap(), 3, poly);
        let d = pair_difference(h.levels[1], &fine, Some(&coarse)).unwrap();
        assert_eq!((d.field.mesh.n_per_dim, d.field.q), (6, 3));
        assert!(d.field.max_abs() < 1e-12);
    }

    #[test]
    fn level_zero_is_the_field() {
        let h = build_hierarchy(HierarchyKind::H, 2, 1, 0, 2, 1).unwrap();
        let f = Field::interpolate(h.mesh(0).unwrap(), 1, |x, _| x);
        let d = pair_difference(h.levels[0], &f, None).unwrap();
        assert_eq!(d.field.values, f.values);
    }

    #[test]
    fn mismatched_draws_rejected() {
        let h = build_hierarchy(HierarchyKind::H, 2, 1, 1, 2, 1).unwrap();
        let tag = |index| DrawTag { seed: 1, level: 1, index };
        let c = Field::zeros(h.mesh(0).unwrap(), 1).with_origin(tag(0));
        let f = Field::zeros(h.mesh(1).unwrap(), 1).with_origin(tag(1));
        assert!(matches!(pair_difference(h.levels[1], &f, Some(&c)), Err(Error::Contract(_))));
    }
}
