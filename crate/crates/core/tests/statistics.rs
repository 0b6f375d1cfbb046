use hpmlmc::dg::{Field, Mesh2D};
use hpmlmc::engine::sigma_lower_from;
use hpmlmc::estimators::LevelAccumulator;
use hpmlmc::hierarchy::{DiffField, LevelSpec};
use hpmlmc::quantiles::normal_quantile;
use hpmlmc::random::unit_uniform;

fn scalar_acc(values: impl Iterator<Item = f64>) -> LevelAccumulator {
    let spec = LevelSpec { level: 0, n_per_dim: 1, q: 0 };
    let mesh = Mesh2D::on_square(1, 0.0, 1.0);
    let mut acc = LevelAccumulator::new(spec, mesh, 0);
    for v in values {
        let d = DiffField {
            level: spec,
            field: Field::new(mesh, 0, vec![v]).unwrap(),
        };
        acc.update(&d, 1.0, 0.0).unwrap();
    }
    acc
}

fn gauss(seed: u64, rep: u64, i: u64) -> f64 {
    normal_quantile(unit_uniform(seed, rep, i, 0))
}

#[test]
fn level_variance_is_unbiased() {
    let (reps, m, sigma) = (10_000u64, 5u64, 1.7);
    let est: Vec<f64> = (0..reps)
        .map(|r| {
            scalar_acc((0..m).map(|i| 0.3 + sigma * gauss(1, r, i)))
                .level_variance()
                .unwrap()
        })
        .collect();
    let mean = est.iter().sum::<f64>() / reps as f64;
    let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    let se = sd / (reps as f64).sqrt();
    assert!((mean - sigma * sigma).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn normal_kurtosis_from_fourth_moment() {
    let acc = scalar_acc((0..100_000u64).map(|i| gauss(2, 0, i)));
    let s2 = acc.level_variance().unwrap();
    let ratio = acc.fourth_moment().unwrap() / (s2 * s2);
    assert!((ratio - 3.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn variance_bound_covers_truth() {
    let (reps, m, sigma, alpha) = (10_000u64, 10u64, 0.8, 0.05);
    let covered = (0..reps)
        .filter(|&r| {
            let acc = scalar_acc((0..m).map(|i| sigma * gauss(3, r, i)));
            let s2 = acc.level_variance().unwrap();
            let mu4 = acc.fourth_moment().unwrap() * m as f64;
            sigma_lower_from(m, s2, Some(mu4), alpha).unwrap() <= sigma
        })
        .count();
    let rate = covered as f64 / reps as f64;
    assert!(rate >= 1.0 - alpha - 0.02, "coverage {rate}");
}
