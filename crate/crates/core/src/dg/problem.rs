use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side forcing applied by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Forcing {
    /// Source term that makes the manufactured state an exact solution.
    #[default]
    Manufactured,
    /// Homogeneous equation.
    None,
}

/// Scalar model `u_t + a . grad u - nu lap u = s` on a periodic square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub advection: [f64; 2],
    pub diffusion: f64,
    pub final_time: f64,
    /// Position of the amplitude `A` in the parameter vector.
    pub amplitude_index: usize,
    /// Position of the frequency `f` in the parameter vector.
    pub frequency_index: usize,
    pub forcing: Forcing,
    pub cfl_safety: f64,
    pub domain_lower: f64,
    pub domain_side: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        // transport velocity of the manufactured density/momentum state
        ProblemSpec {
            advection: [1.0, 1.0],
            diffusion: 1e-3,
            final_time: 1.0,
            amplitude_index: 0,
            frequency_index: 1,
            forcing: Forcing::Manufactured,
            cfl_safety: 0.5,
            domain_lower: -1.0,
            domain_side: 2.0,
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            return Err(Error::config("problem.diffusion", "must be finite and >= 0"));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::config("problem.final_time", "must be finite and > 0"));
        }
        if !self.advection.iter().all(|a| a.is_finite()) {
            return Err(Error::config("problem.advection", "must be finite"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::config("problem.cfl_safety", "must lie in (0, 1]"));
        }
        if !(self.domain_side > 0.0 && self.domain_side.is_finite() && self.domain_lower.is_finite()) {
            return Err(Error::config("problem.domain", "side must be positive and finite"));
        }
        if self.advection_speed() == 0.0 && self.diffusion == 0.0 {
            return Err(Error::config(
                "problem",
                "no transport and no diffusion: the time step is unbounded",
            ));
        }
        Ok(())
    }

    /// `|a1| + |a2|`, the convective speed used in the time-step bound.
    pub fn advection_speed(&self) -> f64 {
        self.advection[0].abs() + self.advection[1].abs()
    }

    pub fn amplitude(&self, y: &[f64]) -> f64 {
        y[self.amplitude_index]
    }

    pub fn frequency(&self, y: &[f64]) -> f64 {
        y[self.frequency_index]
    }

    /// Manufactured state for parameter vector `y`.
    pub fn exact_state(&self, t: f64, x: [f64; 2], y: &[f64]) -> f64 {
        exact_state(t, x, self.amplitude(y), self.frequency(y))
    }
}

/// `u = 2 + A sin(4 pi ((x1 + x2) - f t))`.
pub fn exact_state(t: f64, x: [f64; 2], amplitude: f64, frequency: f64) -> f64 {
    2.0 + amplitude * (4.0 * PI * ((x[0] + x[1]) - frequency * t)).sin()
}

/// Source that makes [`exact_state`] satisfy the model equation.
pub fn source_term(t: f64, x: [f64; 2], y: &[f64], problem: &ProblemSpec) -> f64 {
    if problem.forcing == Forcing::None {
        return 0.0;
    }
    let (c_cos, c_sin) = source_coefficients(problem, problem.amplitude(y), problem.frequency(y));
    let phase = 4.0 * PI * ((x[0] + x[1]) - problem.frequency(y) * t);
    c_cos * phase.cos() + c_sin * phase.sin()
}

/// The source is `c_cos cos(phase) + c_sin sin(phase)`.
pub(crate) fn source_coefficients(problem: &ProblemSpec, amplitude: f64, frequency: f64) -> (f64, f64) {
    let k = 4.0 * PI;
    let [a1, a2] = problem.advection;
    // u_t = -k f A cos, a . grad u = k (a1 + a2) A cos, -nu lap u = 2 k^2 nu A sin
    let c_cos = k * amplitude * (a1 + a2 - frequency);
    let c_sin = 2.0 * k * k * problem.diffusion * amplitude;
    (c_cos, c_sin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_state_values() {
        assert_eq!(exact_state(0.0, [0.0, 0.0], 0.5, 1.0), 2.0);
        assert_eq!(exact_state(0.3, [0.1, 0.7], 0.0, 1.0), 2.0);
        assert_abs_diff_eq!(exact_state(0.125, [0.25, 0.0], 0.5, 1.0), 2.5, epsilon = 1e-14);
    }

    #[test]
    fn zero_amplitude_has_no_source() {
        let p = ProblemSpec::default();
        assert_eq!(source_term(0.4, [0.3, -0.2], &[0.0, 1.1], &p), 0.0);
    }

    #[test]
    fn pure_time_derivative_source() {
        let p = ProblemSpec {
            advection: [0.0, 0.0],
            diffusion: 0.0,
            ..ProblemSpec::default()
        };
        let (a, f, t, x) = (0.7, 1.2, 0.3, [0.1, -0.4]);
        let expected = -4.0 * PI * a * f * (4.0 * PI * ((x[0] + x[1]) - f * t)).cos();
        assert_abs_diff_eq!(source_term(t, x, &[a, f], &p), expected, epsilon = 1e-12);
    }

    #[test]
    fn source_matches_finite_differences() {
        let p = ProblemSpec {
            advection: [0.8, -0.3],
            diffusion: 0.05,
            ..ProblemSpec::default()
        };
        let y = [0.6, 0.93];
        let (t, x) = (0.37, [0.21, -0.58]);
        let u = |t: f64, x1: f64, x2: f64| p.exact_state(t, [x1, x2], &y);
        let e = 1e-5;
        let ut = (u(t + e, x[0], x[1]) - u(t - e, x[0], x[1])) / (2.0 * e);
        let ux = (u(t, x[0] + e, x[1]) - u(t, x[0] - e, x[1])) / (2.0 * e);
        let uy = (u(t, x[0], x[1] + e) - u(t, x[0], x[1] - e)) / (2.0 * e);
        let uxx = (u(t, x[0] + e, x[1]) - 2.0 * u(t, x[0], x[1]) + u(t, x[0] - e, x[1])) / (e * e);
        let uyy = (u(t, x[0], x[1] + e) - 2.0 * u(t, x[0], x[1]) + u(t, x[0], x[1] - e)) / (e * e);
        let fd = ut + p.advection[0] * ux + p.advection[1] * uy - p.diffusion * (uxx + uyy);
        let s = source_term(t, x, &y, &p);
        assert!(((fd - s) / s).abs() < 1e-6, "fd {fd} vs source {s}");
    }

    #[test]
    fn degenerate_problem_rejected() {
        let p = ProblemSpec {
            advection: [0.0, 0.0],
            diffusion: 0.0,
            ..ProblemSpec::default()
        };
        assert!(matches!(p.validate(), Err(Error::Config { .. })));
    }
}
