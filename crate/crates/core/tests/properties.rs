use hpmlmc::dg::{Field, Mesh2D};
use hpmlmc::engine::allocation::optimal_samples_real;
use hpmlmc::engine::{blended_target, optimal_samples, samples_lower, tail_sum};
use hpmlmc::estimators::{fit_rate, LevelAccumulator};
use hpmlmc::hierarchy::{DiffField, LevelSpec};
use hpmlmc::random::{benchmark_params, draw};
use proptest::prelude::*;

fn layout() -> (LevelSpec, Mesh2D, usize) {
    let spec = LevelSpec { level: 1, n_per_dim: 2, q: 1 };
    (spec, Mesh2D::on_square(2, -1.0, 2.0), 1)
}

fn diff(values: &[f64]) -> DiffField {
    let (spec, mesh, q) = layout();
    DiffField {
        level: spec,
        field: Field::new(mesh, q, values.to_vec()).unwrap(),
    }
}

fn accumulate(samples: &[Vec<f64>]) -> LevelAccumulator {
    let (spec, mesh, q) = layout();
    let mut acc = LevelAccumulator::new(spec, mesh, q);
    for (i, s) in samples.iter().enumerate() {
        acc.update(&diff(s), 1.0 + i as f64, 0.0).unwrap();
    }
    acc
}

/// Per-node two-pass central moments reduced like the accumulator.
fn two_pass(samples: &[Vec<f64>]) -> (Vec<f64>, f64, f64) {
    let m = samples.len() as f64;
    let n = samples[0].len();
    let w = Field::zeros(layout().1, 1).quadrature_weights();
    let mean: Vec<f64> = (0..n).map(|k| samples.iter().map(|s| s[k]).sum::<f64>() / m).collect();
    let var: f64 = (0..n)
        .map(|k| w[k] * samples.iter().map(|s| (s[k] - mean[k]).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (m - 1.0);
    let m4: Vec<f64> = (0..n)
        .map(|k| samples.iter().map(|s| (s[k] - mean[k]).powi(4)).sum::<f64>() / m)
        .collect();
    let norm = m4.iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>().sqrt();
    (mean, var, norm)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Cheapest integer sample counts with `sum s2/M <= limit`, by search.
fn integer_optimum(s2: &[f64], w: &[f64], limit: f64, budget: f64) -> f64 {
    fn go(s2: &[f64], w: &[f64], rem: f64, spent: f64, best: &mut f64) {
        if s2.len() == 1 {
            if rem > 0.0 {
                let mut m = (s2[0] / rem).ceil().max(1.0);
                while s2[0] / m > rem {
                    m += 1.0;
                }
                *best = best.min(spent + w[0] * m);
            }
            return;
        }
        let mut m = 1.0;
        while spent + w[0] * m < *best {
            go(&s2[1..], &w[1..], rem - s2[0] / m, spent + w[0] * m, best);
            m += 1.0;
        }
    }
    let mut best = budget * (1.0 + 1e-12);
    go(s2, w, limit, 0.0, &mut best);
    best
}

fn sample_sets() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 16), 4..40)
}

proptest! {
    #[test]
    fn streaming_moments_match_two_pass(samples in sample_sets()) {
        let acc = accumulate(&samples);
        let (mean, var, m4) = two_pass(&samples);
        let got = acc.mean_field().unwrap().values;
        for (a, b) in got.iter().zip(&mean) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert!(close(acc.level_variance().unwrap(), var, 1e-10));
        prop_assert!(close(acc.fourth_moment().unwrap(), m4, 1e-10));
    }

    #[test]
    fn merge_is_associative_and_commutative(samples in sample_sets(), a in 1usize..10, b in 1usize..10) {
        let n = samples.len();
        let (i, j) = (a.min(n - 2), (a + b).min(n - 1));
        let x = accumulate(&samples[..i]);
        let y = accumulate(&samples[i..j]);
        let z = accumulate(&samples[j..]);
        let mut left = x.clone();
        left.merge(&y).unwrap();
        left.merge(&z).unwrap();
        let mut yz = y.clone();
        yz.merge(&z).unwrap();
        let mut right = x.clone();
        right.merge(&yz).unwrap();
        let mut swapped = z.clone();
        swapped.merge(&x).unwrap();
        swapped.merge(&y).unwrap();
        for other in [&right, &swapped] {
            prop_assert_eq!(left.m_tot, other.m_tot);
            prop_assert!(close(left.level_variance().unwrap(), other.level_variance().unwrap(), 1e-10));
            prop_assert!(close(left.fourth_moment().unwrap(), other.fourth_moment().unwrap(), 1e-10));
            let (lm, om) = (left.mean_field().unwrap(), other.mean_field().unwrap());
            for (p, q) in lm.values.iter().zip(&om.values) {
                prop_assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
            }
            prop_assert!(close(left.work_units.mean, other.work_units.mean, 1e-12));
        }
    }

    #[test]
    fn batch_update_matches_sequential(samples in sample_sets()) {
        let seq = accumulate(&samples);
        let (spec, mesh, q) = layout();
        let mut batch = LevelAccumulator::new(spec, mesh, q);
        let items: Vec<_> = samples.iter().enumerate().map(|(i, s)| (diff(s), 1.0 + i as f64, 0.0)).collect();
        batch.update_batch(&items).unwrap();
        prop_assert_eq!(seq.m_tot, batch.m_tot);
        prop_assert!(close(seq.level_variance().unwrap(), batch.level_variance().unwrap(), 1e-10));
    }

    #[test]
    fn allocation_meets_constraint(
        levels in prop::collection::vec((1e-6..1.0f64, 1.0..1e4f64), 1..6),
        eps in 1e-3..0.5f64,
    ) {
        let (s2, w): (Vec<f64>, Vec<f64>) = levels.into_iter().unzip();
        let m = optimal_samples(&s2, &w, eps).unwrap();
        let c: f64 = s2.iter().zip(&m).map(|(s, m)| s / *m as f64).sum();
        prop_assert!(c <= eps * eps / 4.0 * (1.0 + 1e-9));
        let real = optimal_samples_real(&s2, &w, eps).unwrap();
        let cr: f64 = s2.iter().zip(&real).map(|(s, m)| s / m).sum();
        prop_assert!(close(cr, eps * eps / 4.0, 1e-12));
    }

    #[test]
    fn rounding_costs_at_most_one_sample_per_level(
        levels in prop::collection::vec((1e-3..1.0f64, 1.0..50.0f64), 1..3),
        eps in 0.05..0.5f64,
    ) {
        let (s2, w): (Vec<f64>, Vec<f64>) = levels.into_iter().unzip();
        let m = optimal_samples(&s2, &w, eps).unwrap();
        let work: f64 = w.iter().zip(&m).map(|(w, &m)| w * m as f64).sum();
        let best = integer_optimum(&s2, &w, eps * eps / 4.0, work);
        prop_assert!(work <= best + w.iter().sum::<f64>() * (1.0 + 1e-12), "{work} vs {best}");
    }

    #[test]
    fn lower_bound_never_exceeds_estimate(
        levels in prop::collection::vec((1e-6..1.0f64, 0.0..1.0f64, 1.0..1e3f64, 0.0..1.0f64, 0.0..2.0f64), 1..5),
        eps in 1e-3..0.5f64,
    ) {
        let s2: Vec<f64> = levels.iter().map(|l| l.0).collect();
        let sl: Vec<f64> = levels.iter().map(|l| l.0.sqrt() * l.1).collect();
        let w: Vec<f64> = levels.iter().map(|l| l.2).collect();
        let wl: Vec<f64> = levels.iter().map(|l| l.2 * l.3).collect();
        let real = optimal_samples_real(&s2, &w, eps).unwrap();
        for l in 0..levels.len() {
            let wu = w[l] * (1.0 + levels[l].4);
            let lower = samples_lower(&sl, &wl, wu, eps, l).unwrap();
            prop_assert!(lower <= real[l] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn blended_targets_approach_estimate(lower in 0.0..1e4f64, extra in 0.0..1e4f64) {
        let hat = lower + extra;
        let t: Vec<f64> = (1..=3).map(|it| blended_target(lower, hat, it, 0)).collect();
        prop_assert!(t[0] <= t[1] && t[1] <= t[2]);
        prop_assert_eq!(t[2], hat);
    }

    #[test]
    fn fit_recovers_power_laws(slope in -4.0..4.0f64, c in 0.1..10.0f64, n in 3usize..8) {
        let x: Vec<f64> = (0..n).map(|i| 2f64.powi(-(i as i32))).collect();
        let y: Vec<f64> = x.iter().map(|x| c * x.powf(slope)).collect();
        let fit = fit_rate(&x, &y, n).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-12);
    }

    #[test]
    fn draws_are_pure_functions(seed in any::<u64>(), level in 0usize..8, index in any::<u64>()) {
        let p = benchmark_params();
        let a = draw(seed, level, index, &p).unwrap();
        let _ = draw(seed, level, index.wrapping_add(1), &p).unwrap();
        let b = draw(seed, level, index, &p).unwrap();
        prop_assert_eq!(a.y, b.y);
    }

    #[test]
    fn tail_sum_shrinks_with_offset(r in 0.05..0.9f64, p in 0u32..4, q in 1.0..5.0f64) {
        let a = tail_sum(r, p, q, 1.0).unwrap();
        let b = tail_sum(r, p, q + 1.0, 1.0).unwrap();
        // dropping the first term of the series
        prop_assert!(close(a - r.powf(q) * q.powi(p as i32), b, 1e-10));
    }
}
