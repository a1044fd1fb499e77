//! Problem descriptions: sizes, compound-symmetric correlation, and general
//! covariance spectra in the `(λ, Z = Pᵀ1)` parametrisation.

use crate::bounds;
use crate::error::{Error, Result};
use crate::quad::QuadratureSettings;

/// Absolute margin by which `ρ` must stay inside `(−1/(d−1), 1)`.
pub const RHO_MARGIN: f64 = 1e-12;

/// Tolerance on `‖z‖² = d`, relative to `d`.
pub const Z_NORM_TOL: f64 = 1e-10;

/// Which estimator family an operation needs to be well defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// PHB estimator exists: `d ≥ 3`.
    Phb,
    /// HB estimator exists: `d ≥ 4`.
    Hb,
    /// Crossover theory: `d ≥ 5`.
    Crossover,
}

impl Regime {
    pub fn min_d(self) -> usize {
        match self {
            Regime::Phb => 3,
            Regime::Hb => 4,
            Regime::Crossover => 5,
        }
    }
}

/// `d` normal populations with `n` unit-variance replicates each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    d: usize,
    n: usize,
}

impl ModelConfig {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("d must be at least 1"));
        }
        if n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        Ok(Self { d, n })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn df(&self) -> f64 {
        self.d as f64
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `d/n`, the risk of the sample means.
    pub fn mle_risk(&self) -> f64 {
        self.df() / self.nf()
    }

    pub fn require(&self, regime: Regime) -> Result<()> {
        if self.d < regime.min_d() {
            return Err(Error::Domain(format!(
                "{regime:?} regime needs d >= {}, got d = {}",
                regime.min_d(),
                self.d
            )));
        }
        Ok(())
    }
}

/// `Σ_d(ρ) = (1−ρ)I + ρ11ᵀ` for a validated `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundSymmetry {
    config: ModelConfig,
    rho: f64,
}

impl CompoundSymmetry {
    pub fn new(config: ModelConfig, rho: f64) -> Result<Self> {
        config.require(Regime::Phb)?;
        let (lo, hi) = rho_interval(config.d());
        if !rho.is_finite() || rho <= lo + RHO_MARGIN || rho >= hi - RHO_MARGIN {
            return Err(Error::Domain(format!(
                "rho = {rho} outside ({lo}, {hi}) for d = {}",
                config.d()
            )));
        }
        Ok(Self { config, rho })
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The repeated eigenvalue `1 − ρ`.
    pub fn bulk_eigenvalue(&self) -> f64 {
        1.0 - self.rho
    }

    /// The eigenvalue `1 + (d−1)ρ` along `1_d`.
    pub fn top_eigenvalue(&self) -> f64 {
        1.0 + (self.config.df() - 1.0) * self.rho
    }

    /// Row-major `d × d` covariance matrix.
    pub fn matrix(&self) -> Vec<f64> {
        let d = self.config.d();
        let mut m = vec![self.rho; d * d];
        for i in 0..d {
            m[i * d + i] = 1.0;
        }
        m
    }
}

/// Open interval of admissible correlations, `(−1/(d−1), 1)`.
pub fn rho_interval(d: usize) -> (f64, f64) {
    (-1.0 / (d as f64 - 1.0), 1.0)
}

pub fn make_compound_symmetry(d: usize, n: usize, rho: f64) -> Result<CompoundSymmetry> {
    CompoundSymmetry::new(ModelConfig::new(d, n)?, rho)
}

/// A covariance matrix described by its eigenvalues and the rotated ones
/// vector `z = Pᵀ1_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    config: ModelConfig,
    lambdas: Vec<f64>,
    z: Vec<f64>,
}

impl SpectrumSpec {
    pub fn new(config: ModelConfig, lambdas: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let d = config.d();
        if lambdas.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                got: lambdas.len(),
            });
        }
        if z.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                got: z.len(),
            });
        }
        if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Domain(format!("eigenvalue {bad} is not positive")));
        }
        let norm2: f64 = z.iter().map(|v| v * v).sum();
        if (norm2 - config.df()).abs() > Z_NORM_TOL * config.df() {
            return Err(Error::Domain(format!(
                "|z|^2 = {norm2} but must equal d = {d}"
            )));
        }
        Ok(Self { config, lambdas, z })
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn trace(&self) -> f64 {
        self.lambdas.iter().sum()
    }
}

/// Eigen-structure of a compound-symmetric covariance: `1−ρ` repeated `d−1`
/// times, then `1+(d−1)ρ` with eigenvector `1/√d`.
pub fn spectrum_of(cs: &CompoundSymmetry) -> SpectrumSpec {
    let config = cs.config();
    let d = config.d();
    let mut lambdas = vec![cs.bulk_eigenvalue(); d];
    lambdas[d - 1] = cs.top_eigenvalue();
    let mut z = vec![0.0; d];
    z[d - 1] = config.df().sqrt();
    SpectrumSpec { config, lambdas, z }
}

/// Orthonormal eigenvectors of every compound-symmetric matrix of size `d`,
/// column-major: Helmert contrasts first, `1/√d` last (matching
/// [`spectrum_of`]).
pub fn compound_symmetry_eigenvectors(d: usize) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(d);
    for k in 1..d {
        let kf = k as f64;
        let scale = 1.0 / (kf * (kf + 1.0)).sqrt();
        let mut col = vec![0.0; d];
        for v in col.iter_mut().take(k) {
            *v = scale;
        }
        col[k] = -kf * scale;
        cols.push(col);
    }
    cols.push(vec![1.0 / (d as f64).sqrt(); d]);
    cols
}

/// Compound symmetry with its largest eigenvalue raised by `ν ∈ (0, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedSpectrum {
    base: CompoundSymmetry,
    nu: f64,
    bound: f64,
}

impl PerturbedSpectrum {
    /// Validates `ν` against `B(d, n)`, computed here.
    pub fn new(base: CompoundSymmetry, nu: f64, settings: &QuadratureSettings) -> Result<Self> {
        let b = bounds::compute_bounds(base.config(), settings)?.b;
        Self::with_bound(base, nu, b)
    }

    /// Validates `ν` against a precomputed `B(d, n)`.
    pub fn with_bound(base: CompoundSymmetry, nu: f64, b: f64) -> Result<Self> {
        base.config().require(Regime::Crossover)?;
        if !(nu > 0.0 && nu < b) {
            return Err(Error::Domain(format!("nu = {nu} outside (0, B = {b})")));
        }
        Ok(Self { base, nu, bound: b })
    }

    pub fn base(&self) -> CompoundSymmetry {
        self.base
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// The admissible upper limit `B` the perturbation was checked against.
    pub fn bound(&self) -> f64 {
        self.bound
    }
}

pub fn perturb_spectrum(ps: &PerturbedSpectrum) -> SpectrumSpec {
    let mut spec = spectrum_of(&ps.base);
    let d = spec.config.d();
    spec.lambdas[d - 1] += ps.nu;
    spec
}
