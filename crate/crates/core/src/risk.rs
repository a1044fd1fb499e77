//! Integrated risks of the PHB and HB estimators under `μ ~ N_d(0, Σ)`, the
//! risk difference `H(ρ) = R_PHB(ρ) − R_HB(ρ)`, and the auxiliary functions
//! used to bracket its root.

use std::cell::Cell;
use std::fmt;

use log::warn;

use crate::domain::{CompoundSymmetry, ModelConfig, PerturbedSpectrum, Regime, SpectrumSpec};
use crate::error::{Error, Result};
use crate::estimators::EstimatorTag;
use crate::quad::{
    f_kernel, h_kernel, hb_exponent, integrate, ln_xi1_general, ln_xi2_general, ln_xi_cs,
    phb_exponent, upow, Integral, IntegrandKernel, QuadratureSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl fmt::Display for RiskMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskMethod::ClosedForm => "closed_form",
            RiskMethod::Quadrature => "quadrature",
            RiskMethod::MonteCarlo => "monte_carlo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskReport {
    pub tag: EstimatorTag,
    pub value: f64,
    pub method: RiskMethod,
    pub err_estimate: f64,
}

/// A scalar with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub err_estimate: f64,
}

/// The sample means have risk exactly `d/n` under any `Σ`.
pub fn risk_mle(config: ModelConfig) -> RiskReport {
    RiskReport {
        tag: EstimatorTag::Mle,
        value: config.mle_risk(),
        method: RiskMethod::ClosedForm,
        err_estimate: 0.0,
    }
}

fn warn_below(config: ModelConfig, what: &str) {
    if config.d() < Regime::Crossover.min_d() {
        warn!(
            "{what} evaluated at d = {} (< 5): outside the compound-symmetry crossover regime",
            config.d()
        );
    }
}

/// Closed form `d/n − (d−3)/(n[1+n(1−ρ)])`.
pub fn risk_hb_cs(cs: &CompoundSymmetry) -> Result<RiskReport> {
    let c = cs.config();
    c.require(Regime::Hb)?;
    warn_below(c, "HB risk");
    let n = c.nf();
    Ok(RiskReport {
        tag: EstimatorTag::Hb,
        value: c.mle_risk() - (c.df() - 3.0) / (n * (1.0 + n * cs.bulk_eigenvalue())),
        method: RiskMethod::ClosedForm,
        err_estimate: 0.0,
    })
}

/// HB risk by quadrature of `((d−3)²/2n) ∫ u^{(d−3)/2−1} [1+n(1−ρ)(1−u)]^{−(d−1)/2} du`,
/// the integral form the closed form is reduced from.
pub fn risk_hb_cs_quadrature(
    cs: &CompoundSymmetry,
    settings: &QuadratureSettings,
) -> Result<RiskReport> {
    let c = cs.config();
    c.require(Regime::Hb)?;
    let (d, n) = (c.df(), c.nf());
    let a = n * cs.bulk_eigenvalue();
    let p = hb_exponent(c.d());
    let k = IntegrandKernel::new(
        |u: f64| upow(u, p) * (-(d - 1.0) / 2.0 * (a * (1.0 - u)).ln_1p()).exp(),
        p,
    )
    .graded_toward_one(d * (1.0 + a) / 2.0);
    let int = integrate(&k, settings)?;
    Ok(shrink_report(EstimatorTag::Hb, c, d - 3.0, int))
}

fn shrink_report(tag: EstimatorTag, c: ModelConfig, factor: f64, int: Integral) -> RiskReport {
    let scale = factor * factor / (2.0 * c.nf());
    RiskReport {
        tag,
        value: c.mle_risk() - scale * int.value,
        method: RiskMethod::Quadrature,
        err_estimate: scale * int.err_estimate,
    }
}

/// `∫ u^{(d−2)/2−1} / sqrt ξ(u; ρ) du`.
fn phb_cs_integral(cs: &CompoundSymmetry, settings: &QuadratureSettings) -> Result<Integral> {
    let c = cs.config();
    let p = phb_exponent(c.d());
    let k = IntegrandKernel::new(|u: f64| upow(u, p) * (-0.5 * ln_xi_cs(u, cs)).exp(), p)
        .graded_toward_one(c.df() * (1.0 + c.nf() * cs.bulk_eigenvalue().max(1.0)) / 2.0);
    integrate(&k, settings)
}

pub fn risk_phb_cs(cs: &CompoundSymmetry, settings: &QuadratureSettings) -> Result<RiskReport> {
    let c = cs.config();
    c.require(Regime::Phb)?;
    warn_below(c, "PHB risk");
    let int = phb_cs_integral(cs, settings)?;
    Ok(shrink_report(EstimatorTag::Phb, c, c.df() - 2.0, int))
}

fn spectrum_concentration(spec: &SpectrumSpec) -> f64 {
    let c = spec.config();
    (c.df() + c.nf() * spec.trace()) / 2.0
}

pub fn risk_hb_general(spec: &SpectrumSpec, settings: &QuadratureSettings) -> Result<RiskReport> {
    let c = spec.config();
    c.require(Regime::Hb)?;
    let p = hb_exponent(c.d());
    let failed = Cell::new(None);
    let k = IntegrandKernel::new(
        |u: f64| match ln_xi1_general(u, spec) {
            Ok(ln) => upow(u, p) * (-0.5 * ln).exp(),
            Err(e) => {
                failed.set(Some(e));
                0.0
            }
        },
        p,
    )
    .graded_toward_one(spectrum_concentration(spec));
    let int = integrate(&k, settings);
    if let Some(e) = failed.take() {
        return Err(e);
    }
    Ok(shrink_report(EstimatorTag::Hb, c, c.df() - 3.0, int?))
}

pub fn risk_phb_general(spec: &SpectrumSpec, settings: &QuadratureSettings) -> Result<RiskReport> {
    let c = spec.config();
    c.require(Regime::Phb)?;
    let p = phb_exponent(c.d());
    let k = IntegrandKernel::new(
        |u: f64| upow(u, p) * (-0.5 * ln_xi2_general(u, spec)).exp(),
        p,
    )
    .graded_toward_one(spectrum_concentration(spec));
    let int = integrate(&k, settings)?;
    Ok(shrink_report(EstimatorTag::Phb, c, c.df() - 2.0, int))
}

/// `I(ρ) = ∫ h_ρ f_ρ du` without the `ρ > 0` restriction of [`i_of_rho`].
pub(crate) fn i_integral(cs: &CompoundSymmetry, settings: &QuadratureSettings) -> Result<Integral> {
    let c = cs.config();
    let (d, n) = (c.df(), c.nf());
    let k = IntegrandKernel::new(
        |u: f64| h_kernel(u, cs) * f_kernel(u, cs),
        phb_exponent(c.d()),
    )
    .graded_toward_one(d * (1.0 + n) / 2.0);
    integrate(&k, settings)
}

pub fn i_of_rho(cs: &CompoundSymmetry, settings: &QuadratureSettings) -> Result<Estimate> {
    cs.config().require(Regime::Crossover)?;
    if !(cs.rho() > 0.0) {
        return Err(Error::Domain(format!(
            "I(rho) needs rho in (0, 1), got {}",
            cs.rho()
        )));
    }
    let int = i_integral(cs, settings)?;
    Ok(Estimate {
        value: int.value,
        err_estimate: int.err_estimate,
    })
}

/// `H(ρ) = R_PHB(ρ) − R_HB(ρ)`.
///
/// For `ρ > 0` this uses `[(d−3) − (d−2)I(ρ)] / (n[1+n(1−ρ)])`, which avoids
/// subtracting two `O(d/n)` risks near the root; otherwise it subtracts.
pub fn risk_diff_h(cs: &CompoundSymmetry, settings: &QuadratureSettings) -> Result<Estimate> {
    let c = cs.config();
    c.require(Regime::Crossover)?;
    if cs.rho() > 0.0 {
        let (d, n) = (c.df(), c.nf());
        let i = i_integral(cs, settings)?;
        let denom = n * (1.0 + n * cs.bulk_eigenvalue());
        Ok(Estimate {
            value: ((d - 3.0) - (d - 2.0) * i.value) / denom,
            err_estimate: (d - 2.0) * i.err_estimate / denom,
        })
    } else {
        risk_diff_h_direct(cs, settings)
    }
}

/// `H(ρ)` by direct subtraction of the two risks.
pub fn risk_diff_h_direct(
    cs: &CompoundSymmetry,
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    cs.config().require(Regime::Crossover)?;
    let phb = risk_phb_cs(cs, settings)?;
    let hb = risk_hb_cs(cs)?;
    Ok(Estimate {
        value: phb.value - hb.value,
        err_estimate: phb.err_estimate,
    })
}

/// `lim_{ρ↑1} I(ρ) = ∫ (d−2) u^{(d−2)/2−1} / (2 sqrt(1 + nd(1−u))) du`.
pub fn lim_i_at_one(config: ModelConfig, settings: &QuadratureSettings) -> Result<Estimate> {
    config.require(Regime::Crossover)?;
    limit_integral(config.d(), config.nf(), settings)
}

fn limit_integral(d: usize, n: f64, settings: &QuadratureSettings) -> Result<Estimate> {
    let df = d as f64;
    let p = phb_exponent(d);
    let k = IntegrandKernel::new(
        |u: f64| 0.5 * (df - 2.0) * upow(u, p) / (1.0 + n * df * (1.0 - u)).sqrt(),
        p,
    )
    .graded_toward_one(df / 2.0);
    let int = integrate(&k, settings)?;
    Ok(Estimate {
        value: int.value,
        err_estimate: int.err_estimate,
    })
}

/// `J(d) = ∫ (d−2) u^{(d−2)/2−1} / (2 sqrt(1 + d(1−u))) du`, the `n = 1` limit.
pub fn j_of_d(d: usize, settings: &QuadratureSettings) -> Result<Estimate> {
    if d < 4 {
        return Err(Error::Domain(format!("J(d) needs d >= 4, got {d}")));
    }
    limit_integral(d, 1.0, settings)
}

/// `J(d)` in its reflected form `∫ (d−2)(1−u)^{(d−2)/2−1} / (2 sqrt(1 + ud)) du`.
pub fn j_of_d_reflected(d: usize, settings: &QuadratureSettings) -> Result<Estimate> {
    if d < 4 {
        return Err(Error::Domain(format!("J(d) needs d >= 4, got {d}")));
    }
    let df = d as f64;
    let p = phb_exponent(d);
    let k = IntegrandKernel::new(
        |u: f64| 0.5 * (df - 2.0) * upow(1.0 - u, p) / (1.0 + u * df).sqrt(),
        0.0,
    )
    .graded_toward_zero(df / 2.0)
    .graded_toward_one(1e4);
    let int = integrate(&k, settings)?;
    Ok(Estimate {
        value: int.value,
        err_estimate: int.err_estimate,
    })
}

/// `u₀(ρ)` solving `h_ρ(u₀) = I(ρ)`:
/// `1 − (1/n)(1 − I²) / ({1+(d−1)ρ}I² − (1−ρ))`.
pub fn u0_of_rho(cs: &CompoundSymmetry, settings: &QuadratureSettings) -> Result<f64> {
    let i = i_of_rho(cs, settings)?.value;
    u0_from_i(cs, i)
}

pub(crate) fn u0_from_i(cs: &CompoundSymmetry, i: f64) -> Result<f64> {
    let i2 = i * i;
    let denom = cs.top_eigenvalue() * i2 - cs.bulk_eigenvalue();
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!(
            "u0 denominator {denom:e} <= 0 (I = {i} at rho = {})",
            cs.rho()
        )));
    }
    Ok(1.0 - (1.0 - i2) / (cs.config().nf() * denom))
}

/// `β* = 1/sqrt(1 + nν)`.
pub fn beta_star(config: ModelConfig, nu: f64) -> f64 {
    1.0 / (1.0 + config.nf() * nu).sqrt()
}

/// `ψ_ρ(u) = sqrt{[1+n(1−u)λ₀] / [1+n(1−u)(λ₀+ν)]}` with `λ₀ = 1+(d−1)ρ`.
pub fn psi_kernel(u: f64, ps: &PerturbedSpectrum) -> f64 {
    let base = ps.base();
    let s = base.config().nf() * (1.0 - u);
    let top = base.top_eigenvalue();
    ((1.0 + s * top) / (1.0 + s * (top + ps.nu()))).sqrt()
}

/// `ζ₁(ρ) = inf_u ψ_ρ(u) = ψ_ρ(0)`.
pub fn zeta1(ps: &PerturbedSpectrum) -> f64 {
    psi_kernel(0.0, ps)
}

/// Upper bound `K(ρ) ≥ R_HB(G₀) − R_PHB(G₀)` for the perturbed spectrum:
/// `((d−2)²/2n) ∫ u^{(d−2)/2−1}/sqrt ξ(u;ρ) du − β*(d−3)/(n[1+n(1−ρ)])`.
pub fn risk_bound_k(ps: &PerturbedSpectrum, settings: &QuadratureSettings) -> Result<Estimate> {
    let base = ps.base();
    let c = base.config();
    c.require(Regime::Crossover)?;
    let (d, n) = (c.df(), c.nf());
    let int = phb_cs_integral(&base, settings)?;
    let scale = (d - 2.0) * (d - 2.0) / (2.0 * n);
    let beta = beta_star(c, ps.nu());
    Ok(Estimate {
        value: scale * int.value - beta * (d - 3.0) / (n * (1.0 + n * base.bulk_eigenvalue())),
        err_estimate: scale * int.err_estimate,
    })
}
