//! A-priori level count and sample schedule from assumed rate constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate constants of the bias, variance and cost models
/// `||E U - E U_l|| <= c2 h_l^(k1 q~_l)`, `sigma_l^2 <= c3 h_l^(k2 q~_l)`,
/// `w_l <= c1 h_l^-g1 q~_l^g1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma1: f64,
    pub lambda: f64,
    pub beta: f64,
    pub h0: f64,
    /// Polynomial degree of level 0; the shifted degree is `q0 + 1`.
    pub q0: f64,
}

impl PlanConstants {
    pub fn q_tilde(&self, l: usize) -> f64 {
        self.q0 + 1.0 + self.beta * l as f64
    }

    pub fn h(&self, l: usize) -> f64 {
        self.h0 * self.lambda.powi(-(l as i32))
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("gamma1", self.gamma1),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.h0 > 0.0 && self.h0 < 1.0) {
            return Err(Error::config("h0", format!("must lie in (0, 1), got {}", self.h0)));
        }
        if !(self.lambda >= 2.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", format!("must be at least 2, got {}", self.lambda)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", format!("must be finite and >= 0, got {}", self.beta)));
        }
        if !(self.q0 >= 0.0 && self.q0.is_finite()) {
            return Err(Error::config("q0", format!("must be finite and >= 0, got {}", self.q0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `kappa2 q~0 > gamma1`: variance decays faster than cost grows.
    A,
    /// `kappa2 q~0 < gamma1`, with the critical level.
    B { critical_level: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub epsilon: f64,
    /// Positive root of the bias polynomial.
    pub l_bar: f64,
    pub levels: usize,
    pub samples: Vec<u64>,
    pub regime: Regime,
    /// `c1 sum M_l h_l^-g1 q~_l^g1`.
    pub work_bound: f64,
}

/// `sum_(l>=0) r^(q + beta l) (q + beta l)^p` by direct summation.
pub fn tail_sum(r: f64, p: u32, q: f64, beta: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::contract(format!("tail sum needs r in (0, 1), got {r}")));
    }
    if !(beta > 0.0) {
        return Err(Error::contract("tail sum diverges for beta = 0"));
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for l in 0..1_000_000u32 {
        let e = q + beta * l as f64;
        let term = r.powf(e) * e.powi(p as i32);
        // Kahan summation keeps the 1e-12 agreement with closed forms
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        // terms decrease once e > p / ln(1/r)
        if e > p as f64 / -r.ln() && term <= 1e-17 * sum {
            return Ok(sum);
        }
    }
    Err(Error::Numerical(format!("tail sum with r = {r}, p = {p} did not converge")))
}

/// `P(l) = ln(2 c2 / eps) + k1 (q~0 + beta l)(ln h0 - l ln lambda)`.
pub fn bias_polynomial(c: &PlanConstants, epsilon: f64, l: f64) -> f64 {
    (2.0 * c.c2 / epsilon).ln() + c.kappa1 * (c.q0 + 1.0 + c.beta * l) * (c.h0.ln() - l * c.lambda.ln())
}

fn positive_root(c: &PlanConstants, epsilon: f64) -> f64 {
    let qt = c.q0 + 1.0;
    let (lh, ll) = (c.h0.ln(), c.lambda.ln());
    let a = -c.kappa1 * c.beta * ll;
    let b = c.kappa1 * (c.beta * lh - qt * ll);
    let k = (2.0 * c.c2 / epsilon).ln() + c.kappa1 * qt * lh;
    if a == 0.0 {
        return -k / b;
    }
    // a < 0 < k: the roots have opposite signs
    let disc = (b * b - 4.0 * a * k).sqrt();
    let qq = -0.5 * (b + b.signum() * disc);
    let (r1, r2) = (qq / a, k / qq);
    r1.max(r2)
}

/// Level count and per-level sample numbers that bound the bias by `eps/2`
/// and the statistical error by `eps^2/4` under the rate model.
pub fn apriori_plan(epsilon: f64, c: &PlanConstants) -> Result<Plan> {
    c.validate()?;
    let qt0 = c.q0 + 1.0;
    let limit = 1f64.min(2.0 * c.c2 * c.h0.powf(c.kappa1 * qt0));
    if !(epsilon > 0.0 && epsilon < limit) {
        return Err(Error::config(
            "epsilon",
            format!("must lie in (0, {limit}) for these constants, got {epsilon}"),
        ));
    }
    let l_bar = positive_root(c, epsilon);
    let levels = (l_bar.ceil() as usize).max(2);

    let g = c.gamma1;
    let k2q0 = c.kappa2 * qt0;
    let core = |l: usize| c.h(l).powf((g + c.kappa2 * c.q_tilde(l)) / 2.0);
    let p = (g / 2.0).ceil() as u32;
    let r = c.h0.powf(c.kappa2 / 2.0);
    let scale = c.c3 / (epsilon * epsilon);

    let (samples, regime): (Vec<f64>, Regime) = if k2q0 > g {
        if c.beta == 0.0 {
            return Err(Error::config("beta", "the schedule for kappa2 q~0 > gamma1 needs beta >= 1"));
        }
        let s0 = c.h0.powf(-g / 2.0) * tail_sum(r, p, qt0, c.beta)?;
        let m = (0..=levels)
            .map(|l| 4.0 * scale * s0 * core(l) * c.q_tilde(l).powf(-g / 2.0))
            .collect();
        (m, Regime::A)
    } else if k2q0 < g {
        let critical = if c.beta > 0.0 {
            let mut l = 0;
            while c.kappa2 * c.q_tilde(l + 1) < g {
                l += 1;
            }
            Some(l)
        } else {
            None
        };
        let cut = critical.map_or(levels, |ls| ls.min(levels));
        let a = (g - k2q0) / 2.0;
        let geo = 1.0 / (1.0 - c.lambda.powf(-a));
        let lower = |l: usize| 8.0 * scale * core(l) * c.h(cut).powf(-a) * geo;
        let mut m: Vec<f64> = (0..=cut.min(levels)).map(lower).collect();
        if let Some(ls) = critical.filter(|&ls| ls < levels) {
            let s_star = c.h0.powf(-g / 2.0) * tail_sum(r, p, c.q_tilde(ls + 1), c.beta)?;
            m.extend((ls + 1..=levels).map(|l| 8.0 * scale * s_star * core(l) * c.q_tilde(l).powf(-g / 2.0)));
        }
        (m, Regime::B { critical_level: critical })
    } else {
        return Err(Error::config(
            "kappa2",
            format!("kappa2 q~0 = gamma1 = {g} is the borderline case, which has no constructive schedule"),
        ));
    };

    let samples: Vec<u64> = samples.iter().map(|m| m.ceil().max(1.0) as u64).collect();
    let work_bound = c.c1
        * samples
            .iter()
            .enumerate()
            .map(|(l, &m)| m as f64 * c.h(l).powf(-g) * c.q_tilde(l).powf(g))
            .sum::<f64>();
    Ok(Plan {
        epsilon,
        l_bar,
        levels,
        samples,
        regime,
        work_bound,
    })
}
