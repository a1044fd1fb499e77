//! Ordinary least squares of `log ρ*` on `(1, log d, log n)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

pub const MIN_POINTS: usize = 10;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    Natural,
    Ten,
}

impl LogBase {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogBase::Natural => "e",
            LogBase::Ten => "10",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionResult {
    /// Intercept, `log d` slope, `log n` slope.
    pub coefficients: [f64; 3],
    pub std_errors: [f64; 3],
    pub t_statistics: [f64; 3],
    pub adjusted_r2: f64,
    pub num_points: usize,
    pub log_base: LogBase,
}

impl RegressionResult {
    pub fn slope_log_d(&self) -> f64 {
        self.coefficients[1]
    }

    pub fn t_log_n(&self) -> f64 {
        self.t_statistics[2]
    }
}

/// Fits `log ρ* = b₀ + b₁ log d + b₂ log n` over `(d, n, ρ*)` triples.
pub fn fit(points: &[(usize, usize, f64)], base: LogBase) -> CliResult<RegressionResult> {
    let m = points.len();
    if m < MIN_POINTS {
        return Err(CliError::Validation(format!(
            "regression needs at least {MIN_POINTS} points, got {m}"
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.2 > 0.0)) {
        return Err(CliError::Validation(format!(
            "non-positive rho* {} at d={}, n={}",
            p.2, p.0, p.1
        )));
    }
    let x = DMatrix::from_fn(m, 3, |i, j| match j {
        0 => 1.0,
        1 => base.apply(points[i].0 as f64),
        _ => base.apply(points[i].1 as f64),
    });
    let y = DVector::from_iterator(m, points.iter().map(|p| base.apply(p.2)));

    let sv = x.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if sv.iter().any(|s| *s <= RANK_TOL * smax) {
        return Err(CliError::Validation(
            "design matrix is rank deficient (need at least two distinct d and n values)".into(),
        ));
    }
    let xtx = x.transpose() * &x;
    let xtx_inv = xtx
        .try_inverse()
        .ok_or_else(|| CliError::Validation("normal equations are singular".into()))?;
    let beta = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let ybar = y.mean();
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let dof = (m - 3) as f64;
    let sigma2 = rss / dof;
    let r2 = 1.0 - rss / tss;

    let mut coefficients = [0.0; 3];
    let mut std_errors = [0.0; 3];
    let mut t_statistics = [0.0; 3];
    for j in 0..3 {
        coefficients[j] = beta[j];
        std_errors[j] = (sigma2 * xtx_inv[(j, j)]).sqrt();
        t_statistics[j] = beta[j] / std_errors[j];
    }
    Ok(RegressionResult {
        coefficients,
        std_errors,
        t_statistics,
        adjusted_r2: 1.0 - (1.0 - r2) * (m as f64 - 1.0) / dof,
        num_points: m,
        log_base: base,
    })
}

/// `count` distinct integers spread log-uniformly over `[lo, hi]`; rounding
/// collisions are bumped upward.
pub fn log_uniform_integers(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut v: Vec<usize> = (0..count)
        .map(|k| {
            let t = if count > 1 {
                k as f64 / (count - 1) as f64
            } else {
                0.0
            };
            (a + t * (b - a)).exp().round() as usize
        })
        .collect();
    for i in 1..v.len() {
        if v[i] <= v[i - 1] {
            v[i] = v[i - 1] + 1;
        }
    }
    v
}

/// 25 values of `d` in `[10, 500]` crossed with 20 values of `n` in `[1, 100]`.
pub fn default_lattice() -> Vec<(usize, usize)> {
    let ds = log_uniform_integers(10, 500, 25);
    let ns = log_uniform_integers(1, 100, 20);
    ds.iter()
        .flat_map(|&d| ns.iter().map(move |&n| (d, n)))
        .collect()
}
