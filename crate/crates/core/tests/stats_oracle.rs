mod common;

use crown_dieback::matcher::{MatchPair, MatchResult};
use crown_dieback::stats::{
    ols_fit, pearson, regress, residual_vs_distance, t_two_sided_p, LabeledPoint,
};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn planted_line_is_recovered(
        a in -10.0..10.0f64,
        b in -10.0..10.0f64,
        xs in prop::collection::vec(-5.0..5.0f64, 3..60),
    ) {
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 0.1 && a.abs() > 1e-3);
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let fit = ols_fit(&xs, &ys).unwrap();
        prop_assert!((fit.slope - a).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {a}", fit.slope);
        prop_assert!((fit.intercept - b).abs() <= 1e-12 * (a.abs() + b.abs()).max(1.0) * 10.0);
        prop_assert!((fit.r_squared - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn r_squared_is_pearson_squared_and_residuals_cancel(
        pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..80),
    ) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let Ok(fit) = ols_fit(&xs, &ys) else { return Ok(()); };
        let Some(r) = pearson(&xs, &ys) else { return Ok(()); };
        prop_assert!((fit.r_squared - r * r).abs() <= 1e-12);
        let sum: f64 = fit.residuals.iter().sum();
        prop_assert!(sum.abs() <= 1e-9 * xs.len() as f64);
    }
}

#[test]
fn p_value_matches_numerical_integration() {
    let mut worst: f64 = 0.0;
    for df in 1..=100 {
        for k in 0..=40 {
            let t = k as f64 * 0.25;
            let got = t_two_sided_p(t, df as f64);
            let want = common::t_p_oracle(t, df as f64);
            worst = worst.max((got - want).abs());
            assert!((got - want).abs() <= 1e-8, "t={t} df={df}: {got} vs {want}");
        }
    }
    eprintln!("worst |p - oracle| = {worst:e}");
}

#[test]
fn correlation_example() {
    let t = 0.9 * 3f64.sqrt() / 0.19f64.sqrt();
    let p = t_two_sided_p(t, 3.0);
    assert!((p - common::t_p_oracle(t, 3.0)).abs() < 1e-10);
    assert!((p - 0.0374).abs() < 5e-5);
}

#[test]
fn residuals_uncorrelated_with_independent_distance() {
    let mut r = common::rng(51);
    let n = 500;
    let points: Vec<LabeledPoint> = (0..n)
        .map(|i| {
            let x = r.random_range(0.0..1.0);
            LabeledPoint {
                tree_id: format!("t{i}"),
                x,
                y: 0.45 - 0.1 * x + r.random_range(-0.02..0.02),
            }
        })
        .collect();
    let report = regress(&points, "defoliation", "gcc").unwrap();
    let matches = MatchResult {
        pairs: (0..n)
            .map(|i| MatchPair {
                tree_id: format!("t{i}"),
                trunk_index: i,
                crown_index: i,
                distance: r.random_range(0.0..1.5),
            })
            .collect(),
        ..Default::default()
    };
    let rd = residual_vs_distance(&report, &matches).unwrap();
    assert_eq!(rd.rows.len(), n);
    let corr = rd.abs_residual_distance_r.unwrap();
    assert!(corr.abs() <= 0.1, "{corr}");
}
