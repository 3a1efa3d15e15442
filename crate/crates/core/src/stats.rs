//! Simple linear regression with a two-sided slope t-test, GCC agreement,
//! and residual-versus-match-distance tables.

use std::collections::HashMap;

use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::matcher::MatchResult;

/// Smallest p-value reported; anything below is clamped and flagged.
pub const P_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("x and y differ in length ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("predictor is constant; slope undefined")]
    DegenerateX,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("tree {0:?} has no accepted match")]
    UnknownTreeId(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_stat: f64,
    pub p_value: f64,
    /// True when the p-value underflowed and was clamped to [`P_FLOOR`].
    pub p_floored: bool,
    /// `sqrt(SSres / n)`.
    pub rmse: f64,
    pub n: usize,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom:
/// `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

fn check(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewPoints(x.len()));
    }
    if let Some(i) = (0..x.len()).find(|&i| !x[i].is_finite() || !y[i].is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit, StatsError> {
    check(x, y)?;
    let n = x.len();
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateX);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| yi - (intercept + slope * xi))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let df = (n - 2) as f64;

    let (r_squared, t_stat, p) = if syy == 0.0 {
        // Constant response: nothing to explain.
        (0.0, 0.0, 1.0)
    } else {
        let r2 = (sxy * sxy / (sxx * syy)).min(1.0);
        let se = (ss_res / df / sxx).sqrt();
        let t = if se == 0.0 {
            f64::INFINITY.copysign(slope)
        } else {
            slope / se
        };
        (r2, t, t_two_sided_p(t, df))
    };
    let p_floored = p < P_FLOOR;
    Ok(OlsFit {
        slope,
        intercept,
        r_squared,
        t_stat,
        p_value: p.max(P_FLOOR),
        p_floored,
        rmse: (ss_res / n as f64).sqrt(),
        n,
        residuals,
    })
}

/// One observation tied to a surveyed tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledPoint {
    pub tree_id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub tree_id: String,
    pub x: f64,
    pub y: f64,
    pub fitted: f64,
    pub residual: f64,
}

/// OLS of response (GCC) on predictor (defoliation fraction).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub predictor: String,
    pub response: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub p_floored: bool,
    pub rmse: f64,
    pub n: usize,
    pub rows: Vec<ResidualRow>,
}

pub fn regress(
    points: &[LabeledPoint],
    predictor: &str,
    response: &str,
) -> Result<RegressionReport, StatsError> {
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    let fit = ols_fit(&x, &y)?;
    let rows = points
        .iter()
        .zip(&fit.residuals)
        .map(|(p, &r)| ResidualRow {
            tree_id: p.tree_id.clone(),
            x: p.x,
            y: p.y,
            fitted: fit.predict(p.x),
            residual: r,
        })
        .collect();
    Ok(RegressionReport {
        predictor: predictor.into(),
        response: response.into(),
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        t_stat: fit.t_stat,
        p_value: fit.p_value,
        p_floored: fit.p_floored,
        rmse: fit.rmse,
        n: fit.n,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub tree_id: String,
    pub match_distance: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualDistance {
    pub rows: Vec<DistanceRow>,
    /// Pearson correlation between |residual| and match distance; absent
    /// when either column is constant.
    pub abs_residual_distance_r: Option<f64>,
}

pub fn residual_vs_distance(
    report: &RegressionReport,
    matches: &MatchResult,
) -> Result<ResidualDistance, StatsError> {
    let dist: HashMap<&str, f64> = matches
        .pairs
        .iter()
        .map(|p| (p.tree_id.as_str(), p.distance))
        .collect();
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let d = *dist
                .get(r.tree_id.as_str())
                .ok_or_else(|| StatsError::UnknownTreeId(r.tree_id.clone()))?;
            Ok(DistanceRow {
                tree_id: r.tree_id.clone(),
                match_distance: d,
                residual: r.residual,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let abs: Vec<f64> = rows.iter().map(|r| r.residual.abs()).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.match_distance).collect();
    Ok(ResidualDistance {
        abs_residual_distance_r: pearson(&abs, &d),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub n: usize,
    /// R² of the OLS of `b` on `a`.
    pub r_squared: f64,
    pub p_value: f64,
    pub p_floored: bool,
    /// Direct RMSE of `b − a`.
    pub rmse: f64,
    /// Residual RMSE of the OLS of `b` on `a`.
    pub regression_rmse: f64,
    pub slope: f64,
    pub intercept: f64,
}

pub fn agreement(a: &[f64], b: &[f64]) -> Result<Agreement, StatsError> {
    let fit = ols_fit(a, b)?;
    let mse = a.iter().zip(b).map(|(x, y)| (y - x).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(Agreement {
        n: fit.n,
        r_squared: fit.r_squared,
        p_value: fit.p_value,
        p_floored: fit.p_floored,
        rmse: mse.sqrt(),
        regression_rmse: fit.rmse,
        slope: fit.slope,
        intercept: fit.intercept,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}
