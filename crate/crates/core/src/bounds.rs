//! Analytic constants bracketing the crossover correlation, and a bisection
//! solver for the crossover itself.

use log::{debug, warn};

use crate::domain::{CompoundSymmetry, ModelConfig, Regime};
use crate::error::{Error, Result};
use crate::quad::QuadratureSettings;
use crate::risk::{beta_star, lim_i_at_one, risk_diff_h};

/// Relative tolerance used for the `δ*` quadrature.
pub const DELTA_REL_TOL: f64 = 1e-12;
pub const DEFAULT_SOLVER_TOL: f64 = 1e-8;
/// Bisection also stops once the bracket is this narrow.
pub const MIN_BRACKET_WIDTH: f64 = 1e-10;
const MAX_UPPER_EXTENSIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSet {
    pub alpha_d: f64,
    pub rho_l: f64,
    pub rho_u: f64,
    pub delta_star: f64,
    pub b: f64,
    pub config: ModelConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedBoundSet {
    pub beta_star: f64,
    pub alpha_star_d: f64,
    pub rho_tilde_l: f64,
    pub rho_tilde_u: f64,
    pub nu: f64,
    pub base: BoundSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverCertificate {
    pub rho_star: f64,
    /// Final bracket `(lo, hi)` with `H(lo) < 0 < H(hi)`.
    pub bracket: (f64, f64),
    /// `|H(ρ*)|`.
    pub residual: f64,
    pub iterations: usize,
    /// Whether `H(ρ_U) > 0` held, so that no extension of the bracket was needed.
    pub analytic_upper_held: bool,
    pub bounds: BoundSet,
}

/// `α_d = ((d−3)/(d−2))²`.
pub fn alpha_d(d: usize) -> f64 {
    let d = d as f64;
    ((d - 3.0) / (d - 2.0)).powi(2)
}

/// `(1−α)(1+1/x) / (1+(d−1)α)`.
fn rho_bound(d: f64, alpha: f64, x: f64) -> f64 {
    (1.0 - alpha) * (1.0 + 1.0 / x) / (1.0 + (d - 1.0) * alpha)
}

pub fn compute_bounds(config: ModelConfig, settings: &QuadratureSettings) -> Result<BoundSet> {
    config.require(Regime::Crossover)?;
    let tight = settings.with_rel_tol(settings.rel_tol.min(DELTA_REL_TOL));
    let lim = lim_i_at_one(config, &tight)?.value;
    let (d, n) = (config.df(), config.nf());
    let alpha = alpha_d(config.d());
    let delta_star = (1.0 / (lim * lim) - 1.0) / (d * n);
    let set = BoundSet {
        alpha_d: alpha,
        rho_l: rho_bound(d, alpha, n),
        rho_u: rho_bound(d, alpha, n * delta_star),
        delta_star,
        b: (alpha * (1.0 + n * d * delta_star) - 1.0) / n,
        config,
    };
    let checks = [
        (set.alpha_d > 0.0 && set.alpha_d < 1.0, "alpha_d in (0, 1)"),
        (
            set.delta_star > 0.0 && set.delta_star < 1.0,
            "delta* in (0, 1)",
        ),
        (
            0.0 < set.rho_l && set.rho_l < set.rho_u && set.rho_u < 1.0,
            "0 < rho_L < rho_U < 1",
        ),
        (set.b > 0.0, "B > 0"),
    ];
    for (ok, what) in checks {
        if !ok {
            return Err(Error::InvariantViolation(format!(
                "{what} fails at d = {}, n = {}: {set:?}",
                config.d(),
                config.n()
            )));
        }
    }
    Ok(set)
}

pub fn compute_perturbed_bounds(
    config: ModelConfig,
    nu: f64,
    settings: &QuadratureSettings,
) -> Result<PerturbedBoundSet> {
    let base = compute_bounds(config, settings)?;
    if !(nu > 0.0 && nu < base.b) {
        return Err(Error::Domain(format!(
            "nu = {nu} outside (0, B = {})",
            base.b
        )));
    }
    let beta = beta_star(config, nu);
    let alpha_star = beta * beta * base.alpha_d;
    let (d, n) = (config.df(), config.nf());
    let set = PerturbedBoundSet {
        beta_star: beta,
        alpha_star_d: alpha_star,
        rho_tilde_l: rho_bound(d, alpha_star, n),
        rho_tilde_u: rho_bound(d, alpha_star, n * base.delta_star),
        nu,
        base,
    };
    if !(0.0 < set.rho_tilde_l && set.rho_tilde_l < set.rho_tilde_u && set.rho_tilde_u < 1.0) {
        return Err(Error::InvariantViolation(format!(
            "0 < rho~_L < rho~_U < 1 fails: {set:?}"
        )));
    }
    Ok(set)
}

fn h_at(config: ModelConfig, rho: f64, settings: &QuadratureSettings) -> Result<f64> {
    Ok(risk_diff_h(&CompoundSymmetry::new(config, rho)?, settings)?.value)
}

/// Locates `ρ*` by bisection on `H`, starting from `[ρ_L, ρ_U]`.
///
/// When `H(ρ_U) ≤ 0` the upper end is moved toward 1 (halving `1 − hi`)
/// until `H` turns positive, and the certificate records that the analytic
/// upper bound did not hold. Use [`find_crossover_in`] for a fixed bracket.
pub fn find_crossover(
    config: ModelConfig,
    settings: &QuadratureSettings,
    solver_tol: f64,
) -> Result<CrossoverCertificate> {
    let bounds = compute_bounds(config, settings)?;
    let (lo, hi) = (bounds.rho_l, bounds.rho_u);
    let h_lo = h_at(config, lo, settings)?;
    if !(h_lo < 0.0) {
        return Err(bracket_failure(lo, hi, h_lo, f64::NAN));
    }
    let mut hi = hi;
    let mut h_hi = h_at(config, hi, settings)?;
    let analytic_upper_held = h_hi > 0.0;
    let mut lo = lo;
    let mut h_lo = h_lo;
    let mut extensions = 0;
    while !(h_hi > 0.0) {
        if extensions == MAX_UPPER_EXTENSIONS {
            return Err(bracket_failure(lo, hi, h_lo, h_hi));
        }
        lo = hi;
        h_lo = h_hi;
        hi = 1.0 - 0.5 * (1.0 - hi);
        h_hi = h_at(config, hi, settings)?;
        extensions += 1;
    }
    if !analytic_upper_held {
        warn!(
            "H(rho_U) <= 0 at d = {}, n = {} (rho_U = {}); bracket extended to [{lo}, {hi}]",
            config.d(),
            config.n(),
            bounds.rho_u
        );
    }
    bisect(
        config,
        settings,
        solver_tol,
        bounds,
        (lo, h_lo),
        (hi, h_hi),
        analytic_upper_held,
    )
}

/// Bisection on a caller-supplied bracket; fails unless `H(lo) < 0 < H(hi)`.
pub fn find_crossover_in(
    config: ModelConfig,
    lo: f64,
    hi: f64,
    settings: &QuadratureSettings,
    solver_tol: f64,
) -> Result<CrossoverCertificate> {
    let bounds = compute_bounds(config, settings)?;
    let h_lo = h_at(config, lo, settings)?;
    let h_hi = h_at(config, hi, settings)?;
    if !(h_lo < 0.0 && h_hi > 0.0) {
        return Err(bracket_failure(lo, hi, h_lo, h_hi));
    }
    bisect(
        config,
        settings,
        solver_tol,
        bounds,
        (lo, h_lo),
        (hi, h_hi),
        true,
    )
}

fn bracket_failure(lo: f64, hi: f64, h_lo: f64, h_hi: f64) -> Error {
    Error::BracketFailure { lo, hi, h_lo, h_hi }
}

fn bisect(
    config: ModelConfig,
    settings: &QuadratureSettings,
    solver_tol: f64,
    bounds: BoundSet,
    (mut lo, mut h_lo): (f64, f64),
    (mut hi, mut h_hi): (f64, f64),
    analytic_upper_held: bool,
) -> Result<CrossoverCertificate> {
    if !(solver_tol > 0.0) {
        return Err(Error::Domain(format!(
            "solver_tol must be positive, got {solver_tol}"
        )));
    }
    let mut iterations = 0;
    let (rho_star, residual) = loop {
        let mid = 0.5 * (lo + hi);
        let h_mid = h_at(config, mid, settings)?;
        iterations += 1;
        if h_mid.abs() <= solver_tol || hi - lo <= MIN_BRACKET_WIDTH {
            break (mid, h_mid.abs());
        }
        if h_mid < 0.0 {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
            h_hi = h_mid;
        }
    };
    debug!(
        "crossover at d = {}, n = {}: {rho_star} after {iterations} steps",
        config.d(),
        config.n()
    );
    debug_assert!(h_lo < 0.0 && h_hi > 0.0);
    Ok(CrossoverCertificate {
        rho_star,
        bracket: (lo, hi),
        residual,
        iterations,
        analytic_upper_held,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(d: usize, n: usize) -> ModelConfig {
        ModelConfig::new(d, n).unwrap()
    }

    #[test]
    fn small_case_arithmetic() {
        let b = compute_bounds(cfg(5, 1), &QuadratureSettings::default()).unwrap();
        assert_abs_diff_eq!(b.alpha_d, 4.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.rho_l, 0.4, epsilon = 1e-15);
        assert!(b.rho_u > b.rho_l && b.rho_u < 1.0);
    }

    #[test]
    fn rejects_small_d() {
        assert!(compute_bounds(cfg(4, 1), &QuadratureSettings::default()).is_err());
    }

    #[test]
    fn perturbed_bounds_collapse_at_zero() {
        let s = QuadratureSettings::default();
        let p = compute_perturbed_bounds(cfg(10, 2), 1e-12, &s).unwrap();
        assert_abs_diff_eq!(p.beta_star, 1.0, epsilon = 1e-11);
        assert_abs_diff_eq!(p.rho_tilde_l, p.base.rho_l, epsilon = 1e-10);
        assert_abs_diff_eq!(p.rho_tilde_u, p.base.rho_u, epsilon = 1e-10);
        let half = compute_perturbed_bounds(cfg(10, 2), p.base.b / 2.0, &s).unwrap();
        assert_abs_diff_eq!(
            half.beta_star,
            1.0 / (1.0 + p.base.b).sqrt(),
            epsilon = 1e-15
        );
        assert!(compute_perturbed_bounds(cfg(10, 2), p.base.b, &s).is_err());
        assert!(compute_perturbed_bounds(cfg(10, 2), 0.0, &s).is_err());
    }

    #[test]
    fn crossover_small_case() {
        let s = QuadratureSettings::default();
        let c = find_crossover(cfg(10, 2), &s, 1e-10).unwrap();
        assert!(c.residual <= 1e-10 || c.bracket.1 - c.bracket.0 <= MIN_BRACKET_WIDTH);
        assert!(c.rho_star > c.bounds.rho_l);
        assert_abs_diff_eq!(c.rho_star, 0.220788, epsilon = 1e-5);
        let strict = find_crossover_in(cfg(10, 2), 0.1, 0.5, &s, 1e-10).unwrap();
        assert_abs_diff_eq!(strict.rho_star, c.rho_star, epsilon = 1e-8);
    }

    #[test]
    fn strict_bracket_reports_failure() {
        let s = QuadratureSettings::default();
        match find_crossover_in(cfg(10, 2), 0.3, 0.5, &s, 1e-8) {
            Err(Error::BracketFailure { h_lo, .. }) => assert!(h_lo > 0.0),
            other => panic!("expected bracket failure, got {other:?}"),
        }
    }
}
