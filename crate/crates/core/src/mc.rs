//! Monte Carlo oracle for the integrated risks.
//!
//! Replicates are split into blocks of `block_size`; block `b` draws from a
//! ChaCha8 generator seeded with the plan seed on stream `b`, and block
//! summaries are merged in block order. The result therefore depends only on
//! the [`SimPlan`], never on how many threads ran the blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{CompoundSymmetry, ModelConfig, PerturbedSpectrum, Regime, SpectrumSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_hb, estimate_mle, estimate_phb, squared_loss, EstimatorTag, GroupMeans,
};
use crate::par::map_indexed;
use crate::quad::{integrate, phb_exponent, upow, IntegrandKernel, QuadratureSettings};

pub const DEFAULT_BLOCK_SIZE: usize = 1024;
/// Columns of an eigenvector matrix must be orthonormal to this tolerance.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
const SERIES_CUTOFF: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Averages the realised squared loss over simulated data.
    Plain,
    /// Averages the exact conditional risk given each simulated `μ`.
    RaoBlackwell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimPlan {
    pub replicates: usize,
    pub seed: u64,
    pub block_size: usize,
    pub mode: SimMode,
}

impl SimPlan {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            block_size: DEFAULT_BLOCK_SIZE,
            mode: SimMode::RaoBlackwell,
        }
    }

    pub fn with_mode(self, mode: SimMode) -> Self {
        Self { mode, ..self }
    }

    pub fn with_block_size(self, block_size: usize) -> Self {
        Self { block_size, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::domain(
                "at least 2 replicates are needed for a standard error",
            ));
        }
        if self.block_size == 0 {
            return Err(Error::domain("block_size must be positive"));
        }
        Ok(())
    }

    fn blocks(&self) -> usize {
        self.replicates.div_ceil(self.block_size)
    }

    fn block_len(&self, b: usize) -> usize {
        self.block_size.min(self.replicates - b * self.block_size)
    }

    /// The generator owned by block `b`.
    pub fn block_rng(&self, b: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(b as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicates: usize,
    pub tag: EstimatorTag,
}

impl McRiskEstimate {
    /// `(mean − target) / std_error`, taken as 0 when both vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if diff == 0.0 && self.std_error == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRiskSet {
    pub mle: McRiskEstimate,
    pub phb: McRiskEstimate,
    /// Absent for `d = 3`.
    pub hb: Option<McRiskEstimate>,
    /// Replicates where a shrinkage factor was undefined; these are skipped.
    pub degenerate_events: usize,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / total as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count = total;
    }

    fn estimate(&self, tag: EstimatorTag) -> McRiskEstimate {
        let var = if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        };
        McRiskEstimate {
            mean: self.mean,
            std_error: (var / self.count as f64).sqrt(),
            replicates: self.count,
            tag,
        }
    }
}

/// `μ = √(1−ρ)(z − z̄1) + √(1+(d−1)ρ) z̄ 1` with `z ~ N_d(0, I)`.
pub fn sample_mu_cs<R: Rng + ?Sized>(cs: &CompoundSymmetry, rng: &mut R) -> Vec<f64> {
    split_sample(
        cs.config().d(),
        cs.bulk_eigenvalue(),
        cs.top_eigenvalue(),
        rng,
    )
}

/// As [`sample_mu_cs`] with `ν` added to the eigenvalue of the ones direction.
pub fn sample_mu_perturbed<R: Rng + ?Sized>(ps: &PerturbedSpectrum, rng: &mut R) -> Vec<f64> {
    let base = ps.base();
    split_sample(
        base.config().d(),
        base.bulk_eigenvalue(),
        base.top_eigenvalue() + ps.nu(),
        rng,
    )
}

fn split_sample<R: Rng + ?Sized>(d: usize, bulk: f64, top: f64, rng: &mut R) -> Vec<f64> {
    let mut z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let zbar = z.iter().sum::<f64>() / d as f64;
    let (sb, st) = (bulk.sqrt(), top.sqrt());
    for x in &mut z {
        *x = sb * (*x - zbar) + st * zbar;
    }
    z
}

/// Checks that `columns` are `d` orthonormal vectors of length `d`.
pub fn check_orthonormal(columns: &[Vec<f64>], d: usize) -> Result<()> {
    if columns.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            got: columns.len(),
        });
    }
    for (i, ci) in columns.iter().enumerate() {
        if ci.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                got: ci.len(),
            });
        }
        for (j, cj) in columns.iter().enumerate().skip(i) {
            let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            if (dot - target).abs() > ORTHONORMAL_TOL {
                return Err(Error::Orthonormality(format!(
                    "columns {i} and {j} have inner product {dot}"
                )));
            }
        }
    }
    Ok(())
}

/// `μ = P diag(√λ) z`, with `eigvecs` the columns of `P`.
pub fn sample_mu_general<R: Rng + ?Sized>(
    spec: &SpectrumSpec,
    eigvecs: &[Vec<f64>],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = spec.config().d();
    check_orthonormal(eigvecs, d)?;
    Ok(general_draw(spec.lambdas(), eigvecs, rng))
}

fn general_draw<R: Rng + ?Sized>(lambdas: &[f64], eigvecs: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    let d = lambdas.len();
    let mut mu = vec![0.0; d];
    for (l, col) in lambdas.iter().zip(eigvecs) {
        let w = l.sqrt() * rng.sample::<f64, _>(StandardNormal);
        for (m, p) in mu.iter_mut().zip(col) {
            *m += p * w;
        }
    }
    mu
}

/// The law of `μ` for [`mc_integrated_risk`].
#[derive(Debug, Clone, PartialEq)]
pub enum MuLaw {
    CompoundSymmetry(CompoundSymmetry),
    Perturbed(PerturbedSpectrum),
    General {
        spec: SpectrumSpec,
        eigvecs: Vec<Vec<f64>>,
    },
}

impl MuLaw {
    pub fn general(spec: SpectrumSpec, eigvecs: Vec<Vec<f64>>) -> Result<Self> {
        check_orthonormal(&eigvecs, spec.config().d())?;
        Ok(MuLaw::General { spec, eigvecs })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            MuLaw::CompoundSymmetry(cs) => cs.config(),
            MuLaw::Perturbed(ps) => ps.base().config(),
            MuLaw::General { spec, .. } => spec.config(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            MuLaw::CompoundSymmetry(cs) => sample_mu_cs(cs, rng),
            MuLaw::Perturbed(ps) => sample_mu_perturbed(ps, rng),
            MuLaw::General { spec, eigvecs } => general_draw(spec.lambdas(), eigvecs, rng),
        }
    }
}

/// Exact risks given `μ`, from the noncentral χ² inverse moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalRisks {
    pub mle: f64,
    pub phb: f64,
    pub hb: Option<f64>,
}

/// `E[‖μ̂ − μ‖² | μ]` for each estimator:
/// PHB `d/n − ((d−2)²/n) E[1/χ'²_d(nμᵀμ)]`,
/// HB `d/n − ((d−3)²/n) E[1/χ'²_{d−1}(n Σ(μ_j − μ̄)²)]`.
pub fn conditional_risks(
    mu: &[f64],
    n: usize,
    settings: &QuadratureSettings,
) -> Result<ConditionalRisks> {
    let config = ModelConfig::new(mu.len(), n)?;
    config.require(Regime::Phb)?;
    let (d, nf) = (config.df(), config.nf());
    let norm2: f64 = mu.iter().map(|m| m * m).sum();
    let mean = mu.iter().sum::<f64>() / d;
    let spread: f64 = mu.iter().map(|m| (m - mean) * (m - mean)).sum();
    let phb = config.mle_risk()
        - (d - 2.0) * (d - 2.0) / nf * ncx2_inv_moment(config.d(), nf * norm2, settings)?;
    let hb = if config.d() >= Regime::Hb.min_d() {
        Some(
            config.mle_risk()
                - (d - 3.0) * (d - 3.0) / nf
                    * ncx2_inv_moment(config.d() - 1, nf * spread, settings)?,
        )
    } else {
        None
    };
    Ok(ConditionalRisks {
        mle: config.mle_risk(),
        phb,
        hb,
    })
}

/// One draw of `Ȳ_j ~ N(μ_j, 1/n)` and the three realised losses.
fn plain_losses<R: Rng + ?Sized>(
    mu: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<(f64, Option<f64>, Option<f64>)> {
    let sd = 1.0 / (n as f64).sqrt();
    let ybar: Vec<f64> = mu
        .iter()
        .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let gm = GroupMeans::new(ybar, n)?;
    let mle = squared_loss(&estimate_mle(&gm), mu)?;
    let shrunk = |est: Result<_>| -> Result<Option<f64>> {
        match est {
            Ok(e) => Ok(Some(squared_loss(&e, mu)?)),
            Err(Error::DegenerateInput(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let phb = shrunk(estimate_phb(&gm))?;
    let hb = if gm.config().d() >= Regime::Hb.min_d() {
        shrunk(estimate_hb(&gm))?
    } else {
        Some(0.0)
    };
    Ok((mle, phb, hb))
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockSummary {
    mle: Moments,
    phb: Moments,
    hb: Moments,
    degenerate: usize,
}

impl BlockSummary {
    fn merge(&mut self, o: &BlockSummary) {
        self.mle.merge(&o.mle);
        self.phb.merge(&o.phb);
        self.hb.merge(&o.hb);
        self.degenerate += o.degenerate;
    }
}

fn run_block(
    law: &MuLaw,
    plan: &SimPlan,
    settings: &QuadratureSettings,
    b: usize,
) -> Result<BlockSummary> {
    let config = law.config();
    let mut rng = plan.block_rng(b);
    let mut s = BlockSummary::default();
    for _ in 0..plan.block_len(b) {
        let mu = law.sample(&mut rng);
        match plan.mode {
            SimMode::Plain => {
                let (mle, phb, hb) = plain_losses(&mu, config.n(), &mut rng)?;
                s.mle.push(mle);
                match (phb, hb) {
                    (Some(p), Some(h)) => {
                        s.phb.push(p);
                        s.hb.push(h);
                    }
                    _ => s.degenerate += 1,
                }
            }
            SimMode::RaoBlackwell => {
                let c = conditional_risks(&mu, config.n(), settings)?;
                s.mle.push(c.mle);
                s.phb.push(c.phb);
                s.hb.push(c.hb.unwrap_or(0.0));
            }
        }
    }
    Ok(s)
}

/// Estimates the integrated risks of the MLE, PHB and HB estimators under
/// `μ ~ law` according to `plan`.
pub fn mc_integrated_risk(
    law: &MuLaw,
    plan: &SimPlan,
    settings: &QuadratureSettings,
) -> Result<McRiskSet> {
    plan.validate()?;
    let config = law.config();
    config.require(Regime::Phb)?;
    let blocks = map_indexed(plan.blocks(), |b| run_block(law, plan, settings, b));
    let mut total = BlockSummary::default();
    for block in blocks {
        total.merge(&block?);
    }
    let mut mle = total.mle.estimate(EstimatorTag::Mle);
    if plan.mode == SimMode::RaoBlackwell {
        mle.std_error = 0.0;
    }
    Ok(McRiskSet {
        mle,
        phb: total.phb.estimate(EstimatorTag::Phb),
        hb: (config.d() >= Regime::Hb.min_d()).then(|| total.hb.estimate(EstimatorTag::Hb)),
        degenerate_events: total.degenerate,
    })
}

/// Plain-mode average of the realised losses at a fixed `μ`.
pub fn mc_fixed_mu(mu: &[f64], n: usize, plan: &SimPlan) -> Result<McRiskSet> {
    plan.validate()?;
    let config = ModelConfig::new(mu.len(), n)?;
    config.require(Regime::Phb)?;
    let blocks = map_indexed(plan.blocks(), |b| -> Result<BlockSummary> {
        let mut rng = plan.block_rng(b);
        let mut s = BlockSummary::default();
        for _ in 0..plan.block_len(b) {
            let (mle, phb, hb) = plain_losses(mu, n, &mut rng)?;
            s.mle.push(mle);
            match (phb, hb) {
                (Some(p), Some(h)) => {
                    s.phb.push(p);
                    s.hb.push(h);
                }
                _ => s.degenerate += 1,
            }
        }
        Ok(s)
    });
    let mut total = BlockSummary::default();
    for block in blocks {
        total.merge(&block?);
    }
    Ok(McRiskSet {
        mle: total.mle.estimate(EstimatorTag::Mle),
        phb: total.phb.estimate(EstimatorTag::Phb),
        hb: (config.d() >= Regime::Hb.min_d()).then(|| total.hb.estimate(EstimatorTag::Hb)),
        degenerate_events: total.degenerate,
    })
}

fn check_ncx2(df: usize, lambda: f64) -> Result<()> {
    if df < 3 {
        return Err(Error::Domain(format!(
            "E[1/S] is infinite for df = {df} < 3"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "noncentrality {lambda} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// `E[1/S]` for `S ~ χ'²_df(λ)`, as `½ ∫ u^{(df−2)/2−1} e^{−λ(1−u)/2} du`.
pub fn ncx2_inv_moment(df: usize, lambda: f64, settings: &QuadratureSettings) -> Result<f64> {
    check_ncx2(df, lambda)?;
    let p = phb_exponent(df);
    let half = 0.5 * lambda;
    let k = IntegrandKernel::new(|u: f64| 0.5 * upow(u, p) * (-half * (1.0 - u)).exp(), p)
        .graded_toward_one(df as f64 / 2.0 + half);
    Ok(integrate(&k, settings)?.value)
}

/// `E[1/S]` as the Poisson mixture `Σ_k Pois(k; λ/2) / (df + 2k − 2)`,
/// summed outward from the Poisson mode.
pub fn ncx2_inv_moment_series(df: usize, lambda: f64) -> Result<f64> {
    check_ncx2(df, lambda)?;
    let m = 0.5 * lambda;
    let term = |k: f64| 1.0 / (df as f64 + 2.0 * k - 2.0);
    if m == 0.0 {
        return Ok(term(0.0));
    }
    let mode = m.floor();
    let ln_fact: f64 = (1..=mode as u64).map(|i| (i as f64).ln()).sum();
    let p_mode = (-m + mode * m.ln() - ln_fact).exp();

    let mut sum = p_mode * term(mode);
    let (mut k, mut p) = (mode, p_mode);
    loop {
        p *= m / (k + 1.0);
        k += 1.0;
        let t = p * term(k);
        sum += t;
        if t < SERIES_CUTOFF * sum {
            break;
        }
    }
    let (mut k, mut p) = (mode, p_mode);
    while k > 0.0 {
        p *= k / m;
        k -= 1.0;
        let t = p * term(k);
        sum += t;
        if t < SERIES_CUTOFF * sum {
            break;
        }
    }
    Ok(sum)
}
