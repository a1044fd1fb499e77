//! Adaptive quadrature on `[0, 1]` and the integrand kernels of the risk
//! formulas.
//!
//! [`integrate`] is a globally adaptive 7–15 point Gauss–Kronrod scheme: the
//! panel with the largest error estimate is bisected until the summed
//! estimate meets `max(abs_tol, rel_tol·|value|)`. An algebraic endpoint
//! singularity `u^p`, `−1 < p < 0`, is removed first with `u = t^{1/(p+1)}`.
//! Risk integrands put almost all of their mass within `O(1/(nd))` of `u = 1`
//! at large sizes, so kernels carry initial breakpoints graded towards the
//! endpoint where the mass sits.

use crate::domain::{CompoundSymmetry, SpectrumSpec};
use crate::error::{Error, Result};

/// Above this size products over the spectrum are accumulated as logs.
pub const LOG_SPACE_MIN_D: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 2048,
        }
    }
}

impl QuadratureSettings {
    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions must be positive"));
        }
        Ok(())
    }
}

/// An integrand on `(0, 1]` behaving like `c·u^p` near zero.
pub struct IntegrandKernel<F> {
    pub evaluator: F,
    pub endpoint_exponent: f64,
    /// Interior points used to seed the initial partition.
    pub breakpoints: Vec<f64>,
}

impl<F: Fn(f64) -> f64> IntegrandKernel<F> {
    pub fn new(evaluator: F, endpoint_exponent: f64) -> Self {
        Self {
            evaluator,
            endpoint_exponent,
            breakpoints: Vec::new(),
        }
    }

    /// Adds breakpoints `1 − 2^{−k}` down to a spacing of about
    /// `1/(4·concentration)`, for integrands whose mass lies within
    /// `~1/concentration` of `u = 1`.
    pub fn graded_toward_one(mut self, concentration: f64) -> Self {
        for x in geometric_offsets(concentration) {
            self.breakpoints.push(1.0 - x);
        }
        self
    }

    /// Mirror of [`Self::graded_toward_one`] for mass near `u = 0`.
    pub fn graded_toward_zero(mut self, concentration: f64) -> Self {
        self.breakpoints.extend(geometric_offsets(concentration));
        self
    }
}

fn geometric_offsets(concentration: f64) -> impl Iterator<Item = f64> {
    let levels = if concentration > 1.0 {
        ((4.0 * concentration).log2().ceil() as i32).clamp(1, 50)
    } else {
        0
    };
    (1..=levels).map(|k| 0.5f64.powi(k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub err_estimate: f64,
    pub subdivisions: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gauss_kronrod<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = g(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = g(center - dx);
        let f2 = g(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value, err }
}

/// Integrates `kernel` over `[0, 1]`.
pub fn integrate<F: Fn(f64) -> f64>(
    kernel: &IntegrandKernel<F>,
    settings: &QuadratureSettings,
) -> Result<Integral> {
    settings.validate()?;
    let p = kernel.endpoint_exponent;
    if !(p > -1.0) {
        return Err(Error::Domain(format!(
            "endpoint exponent {p} is not integrable (must exceed -1)"
        )));
    }
    let f = &kernel.evaluator;
    if p < 0.0 {
        // u = t^q, du = q t^{q-1} dt; the transformed integrand is bounded at 0.
        let q = 1.0 / (p + 1.0);
        let g = |t: f64| q * t.powf(q - 1.0) * f(t.powf(q));
        let bps: Vec<f64> = kernel.breakpoints.iter().map(|u| u.powf(p + 1.0)).collect();
        adaptive(&g, &bps, settings)
    } else {
        adaptive(f, &kernel.breakpoints, settings)
    }
}

fn adaptive<G: Fn(f64) -> f64>(
    g: &G,
    breakpoints: &[f64],
    settings: &QuadratureSettings,
) -> Result<Integral> {
    let mut edges: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|x| *x > 0.0 && *x < 1.0)
        .collect();
    edges.push(0.0);
    edges.push(1.0);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut panels: Vec<Panel> = edges
        .windows(2)
        .map(|w| gauss_kronrod(g, w[0], w[1]))
        .collect();

    loop {
        let (value, err) = totals(&panels);
        let tol = settings.abs_tol.max(settings.rel_tol * value.abs());
        if err <= tol {
            return Ok(Integral {
                value,
                err_estimate: err,
                subdivisions: panels.len(),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err).then(y.0.cmp(&x.0)))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        let too_narrow = mid <= a || mid >= b || (b - a) < 1e-15 * a.abs().max(b.abs());
        if panels.len() >= settings.max_subdivisions || too_narrow {
            return Err(Error::ConvergenceFailure {
                value,
                err_estimate: err,
                subdivisions: panels.len(),
            });
        }
        panels[worst] = gauss_kronrod(g, a, mid);
        panels.insert(worst + 1, gauss_kronrod(g, mid, b));
    }
}

/// Compensated sums over panels in left-to-right order.
fn totals(panels: &[Panel]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut err = 0.0;
    for p in panels {
        let y = p.value - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        err += p.err;
    }
    (sum, err)
}

fn check_unit(u: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("u = {u} outside [0, 1]")));
    }
    Ok(())
}

/// `ln ξ(u; ρ)` with `ξ = [1+n{1+(d−1)ρ}(1−u)]·[1+n(1−ρ)(1−u)]^{d−1}`.
pub fn ln_xi_cs(u: f64, cs: &CompoundSymmetry) -> f64 {
    let c = cs.config();
    let s = c.nf() * (1.0 - u);
    (s * cs.top_eigenvalue()).ln_1p() + (c.df() - 1.0) * (s * cs.bulk_eigenvalue()).ln_1p()
}

pub fn xi_cs(u: f64, cs: &CompoundSymmetry) -> Result<f64> {
    check_unit(u)?;
    let c = cs.config();
    if c.d() >= LOG_SPACE_MIN_D {
        return Ok(ln_xi_cs(u, cs).exp());
    }
    let s = c.nf() * (1.0 - u);
    Ok((1.0 + s * cs.top_eigenvalue()) * (1.0 + s * cs.bulk_eigenvalue()).powi(c.d() as i32 - 1))
}

/// `ln ∏_j (1 + n(1−u)λ_j)`.
pub fn ln_xi2_general(u: f64, spec: &SpectrumSpec) -> f64 {
    let s = spec.config().nf() * (1.0 - u);
    spec.lambdas().iter().map(|l| (s * l).ln_1p()).sum()
}

/// The determinant-lemma bracket `1 − (n(1−u)/d) Σ λ_j z_j² / (1 + n(1−u)λ_j)`.
pub fn xi1_bracket(u: f64, spec: &SpectrumSpec) -> f64 {
    let c = spec.config();
    let s = c.nf() * (1.0 - u);
    let sum: f64 = spec
        .lambdas()
        .iter()
        .zip(spec.z())
        .map(|(l, z)| l * z * z / (1.0 + s * l))
        .sum();
    1.0 - s / c.df() * sum
}

pub fn ln_xi1_general(u: f64, spec: &SpectrumSpec) -> Result<f64> {
    let bracket = xi1_bracket(u, spec);
    if !(bracket > 0.0) {
        return Err(Error::Numerical(format!(
            "xi1 bracket {bracket:e} <= 0 at u = {u}"
        )));
    }
    Ok(bracket.ln() + ln_xi2_general(u, spec))
}

pub fn xi2_general(u: f64, spec: &SpectrumSpec) -> Result<f64> {
    check_unit(u)?;
    if spec.config().d() >= LOG_SPACE_MIN_D {
        return Ok(ln_xi2_general(u, spec).exp());
    }
    let s = spec.config().nf() * (1.0 - u);
    Ok(spec.lambdas().iter().map(|l| 1.0 + s * l).product())
}

pub fn xi1_general(u: f64, spec: &SpectrumSpec) -> Result<f64> {
    check_unit(u)?;
    let bracket = xi1_bracket(u, spec);
    if !(bracket > 0.0) {
        return Err(Error::Numerical(format!(
            "xi1 bracket {bracket:e} <= 0 at u = {u}"
        )));
    }
    Ok(bracket * xi2_general(u, spec)?)
}

/// `h_ρ(u) = sqrt{[1+n(1−ρ)(1−u)] / [1+n(1+(d−1)ρ)(1−u)]}`.
pub fn h_kernel(u: f64, cs: &CompoundSymmetry) -> f64 {
    let s = cs.config().nf() * (1.0 - u);
    ((1.0 + s * cs.bulk_eigenvalue()) / (1.0 + s * cs.top_eigenvalue())).sqrt()
}

/// The probability density
/// `f_ρ(u) = (d−2)[1+n(1−ρ)] u^{(d−2)/2−1} / (2[1+n(1−ρ)(1−u)]^{d/2})`.
pub fn f_kernel(u: f64, cs: &CompoundSymmetry) -> f64 {
    let c = cs.config();
    let d = c.df();
    let a = c.nf() * cs.bulk_eigenvalue();
    let denom_ln = (d / 2.0) * (a * (1.0 - u)).ln_1p();
    0.5 * (d - 2.0) * (1.0 + a) * upow(u, phb_exponent(c.d())) * (-denom_ln).exp()
}

/// Exponent `(d−2)/2 − 1` of the PHB-type integrands.
pub fn phb_exponent(d: usize) -> f64 {
    (d as f64 - 2.0) / 2.0 - 1.0
}

/// Exponent `(d−3)/2 − 1` of the HB-type integrands.
pub fn hb_exponent(d: usize) -> f64 {
    (d as f64 - 3.0) / 2.0 - 1.0
}

/// `u^p`, with `0^0 = 1`.
pub(crate) fn upow(u: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        u.powf(p)
    }
}
