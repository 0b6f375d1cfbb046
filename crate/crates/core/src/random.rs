//! The stochastic input space: parameter distributions, reproducible coupled
//! draws and a deterministic tensor quadrature over the parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gauss_legendre};
use crate::quantiles::normal_quantile;

/// Marginal distribution of one random input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Uniform { a: f64, b: f64 },
    Normal { mean: f64, stddev: f64 },
    /// Degenerate input held at `value`.
    Fixed { value: f64 },
}

impl Distribution {
    pub fn density(&self, y: f64) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => {
                if (a..=b).contains(&y) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Distribution::Normal { mean, stddev } => {
                let z = (y - mean) / stddev;
                (-0.5 * z * z).exp() / (stddev * (2.0 * std::f64::consts::PI).sqrt())
            }
            Distribution::Fixed { .. } => 1.0,
        }
    }

    /// Maps a uniform variate in (0, 1) to this distribution by inverse CDF.
    pub fn from_unit(&self, u: f64) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => (a + (b - a) * u).clamp(a, b),
            Distribution::Normal { mean, stddev } => mean + stddev * normal_quantile(u),
            Distribution::Fixed { value } => value,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => 0.5 * (a + b),
            Distribution::Normal { mean, .. } => mean,
            Distribution::Fixed { value } => value,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            Distribution::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::config(
                        format!("params.{name}"),
                        format!("uniform bounds need a < b, got a={a}, b={b}"),
                    ));
                }
            }
            Distribution::Normal { mean, stddev } => {
                if !(mean.is_finite() && stddev.is_finite() && stddev > 0.0) {
                    return Err(Error::config(
                        format!("params.{name}"),
                        format!("normal needs a positive standard deviation, got {stddev}"),
                    ));
                }
            }
            Distribution::Fixed { value } => {
                if !value.is_finite() {
                    return Err(Error::config(format!("params.{name}"), "fixed value must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// One independent random input `y[index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub index: usize,
    pub dist: Distribution,
}

impl ParamSpec {
    pub fn uniform(name: &str, index: usize, a: f64, b: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            index,
            dist: Distribution::Uniform { a, b },
        }
    }

    pub fn normal(name: &str, index: usize, mean: f64, stddev: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            index,
            dist: Distribution::Normal { mean, stddev },
        }
    }
}

/// The benchmark inputs: amplitude `A ~ U(0.1, 0.9)` and frequency
/// `f ~ N(1, 0.05^2)`.
pub fn benchmark_params() -> Vec<ParamSpec> {
    vec![
        ParamSpec::uniform("A", 0, 0.1, 0.9),
        ParamSpec::normal("f", 1, 1.0, 0.05),
    ]
}

/// Checks the specs and returns their distributions ordered by index.
pub fn validate_specs(specs: &[ParamSpec]) -> Result<Vec<Distribution>> {
    if specs.is_empty() {
        return Err(Error::config("params", "at least one random parameter is required"));
    }
    let mut slots: Vec<Option<Distribution>> = vec![None; specs.len()];
    for spec in specs {
        spec.dist.validate(&spec.name)?;
        let slot = slots.get_mut(spec.index).ok_or_else(|| {
            Error::config(
                format!("params.{}.index", spec.name),
                format!("index {} outside 0..{}", spec.index, specs.len()),
            )
        })?;
        if slot.is_some() {
            return Err(Error::config(
                format!("params.{}.index", spec.name),
                format!("duplicate index {}", spec.index),
            ));
        }
        *slot = Some(spec.dist);
    }
    Ok(slots.into_iter().map(|d| d.expect("all slots filled")).collect())
}

/// A parameter vector together with the coordinates it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub level: usize,
    pub index: u64,
    pub seed: u64,
    pub y: Vec<f64>,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based uniform variate in the open interval (0, 1).
///
/// The value is a pure function of the four coordinates, so draws can be
/// produced in any order and on any worker.
pub fn unit_uniform(seed: u64, level: u64, index: u64, component: u64) -> f64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ level.wrapping_mul(0xd6e8_feb8_6659_fd93));
    h = splitmix64(h ^ index.wrapping_mul(0xa076_1d64_78bd_642f));
    h = splitmix64(h ^ component.wrapping_mul(0xe703_7ed1_a0b4_28db));
    ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Draws the parameter vector for sample `index` on `level`.
///
/// Both members of a coupled difference `U_l - U_{l-1}` use this single draw.
pub fn draw(seed: u64, level: usize, index: u64, specs: &[ParamSpec]) -> Result<SampleDraw> {
    let dists = validate_specs(specs)?;
    Ok(draw_validated(seed, level, index, &dists))
}

pub(crate) fn draw_validated(seed: u64, level: usize, index: u64, dists: &[Distribution]) -> SampleDraw {
    let y = dists
        .iter()
        .enumerate()
        .map(|(c, d)| d.from_unit(unit_uniform(seed, level as u64, index, c as u64)))
        .collect();
    SampleDraw {
        level,
        index,
        seed,
        y,
    }
}

/// Product density of independent inputs.
pub fn joint_density(y: &[f64], specs: &[ParamSpec]) -> Result<f64> {
    let dists = validate_specs(specs)?;
    if y.len() != dists.len() {
        return Err(Error::contract(format!(
            "parameter vector has {} entries but {} specs were given",
            y.len(),
            dists.len()
        )));
    }
    Ok(y.iter().zip(&dists).map(|(&yi, d)| d.density(yi)).product())
}

/// Tensor-product quadrature over the parameter space with unit total mass.
///
/// Uniform components use Gauss–Legendre nodes mapped to `[a, b]`, normal
/// components use Gauss–Hermite nodes, fixed components a single node. The
/// first component varies slowest.
pub fn reference_quadrature(specs: &[ParamSpec], nodes_per_dim: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    if nodes_per_dim == 0 {
        return Err(Error::config("nodes_per_dim", "must be at least 1"));
    }
    let dists = validate_specs(specs)?;
    let rules: Vec<(Vec<f64>, Vec<f64>)> = dists
        .iter()
        .map(|d| match *d {
            Distribution::Uniform { a, b } => {
                let (x, w) = gauss_legendre(nodes_per_dim);
                (
                    x.iter().map(|xi| a + 0.5 * (b - a) * (xi + 1.0)).collect(),
                    w.iter().map(|wi| 0.5 * wi).collect(),
                )
            }
            Distribution::Normal { mean, stddev } => {
                let (x, w) = gauss_hermite(nodes_per_dim);
                let norm = std::f64::consts::PI.sqrt();
                (
                    x.iter()
                        .map(|xi| mean + std::f64::consts::SQRT_2 * stddev * xi)
                        .collect(),
                    w.iter().map(|wi| wi / norm).collect(),
                )
            }
            Distribution::Fixed { value } => (vec![value], vec![1.0]),
        })
        .collect();

    let mut points: Vec<(Vec<f64>, f64)> = vec![(Vec::with_capacity(dists.len()), 1.0)];
    for (nodes, weights) in &rules {
        let mut next = Vec::with_capacity(points.len() * nodes.len());
        for (y, w) in &points {
            for (&node, &wn) in nodes.iter().zip(weights) {
                let mut yy = y.clone();
                yy.push(node);
                next.push((yy, w * wn));
            }
        }
        points = next;
    }
    Ok(points)
}
