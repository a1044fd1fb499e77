use std::fs;
use std::io::Write as _;

use hbrisk::bounds::{
    compute_bounds, compute_perturbed_bounds, find_crossover, CrossoverCertificate,
};
use hbrisk::domain::{
    make_compound_symmetry, perturb_spectrum, ModelConfig, PerturbedSpectrum, Regime,
};
use hbrisk::mc::{mc_integrated_risk, McRiskEstimate, MuLaw, SimMode, SimPlan};
use hbrisk::par::map_slice;
use hbrisk::quad::QuadratureSettings;
use hbrisk::risk::{
    risk_diff_h, risk_hb_cs, risk_hb_general, risk_mle, risk_phb_cs, risk_phb_general, RiskMethod,
};
use log::warn;

use crate::args::{
    BoundsArgs, Cli, Command, Common, CrossoverArgs, ModeArg, RegressionArgs, RiskArgs,
    ValidateArgs,
};
use crate::error::{CliError, CliResult};
use crate::output::{num, Csv};
use crate::regression::{default_lattice, fit, LogBase, RegressionResult};

/// Smallest number of (d, n) pairs accepted by the regression.
pub const MIN_REGRESSION_PAIRS: usize = 50;
/// A validation case fails when `|z|` exceeds this.
pub const Z_LIMIT: f64 = 3.0;

pub const DEFAULT_VALIDATE_D: [usize; 3] = [5, 10, 20];
pub const DEFAULT_VALIDATE_N: [usize; 2] = [1, 5];
pub const DEFAULT_VALIDATE_RHO: [f64; 4] = [-0.05, 0.0, 0.3, 0.7];

/// CSV output plus a failure to report after the CSV has been written.
#[derive(Debug)]
pub struct Report {
    pub csv: Csv,
    pub failure: Option<CliError>,
}

impl From<Csv> for Report {
    fn from(csv: Csv) -> Self {
        Self { csv, failure: None }
    }
}

pub fn settings(common: &Common) -> CliResult<QuadratureSettings> {
    let s = QuadratureSettings::default().with_rel_tol(common.rel_tol);
    s.validate()?;
    Ok(s)
}

fn provenance(csv: &mut Csv, cmd: &Command) {
    csv.meta(format!(
        "{} {}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    ));
    let flags: Vec<String> = cmd
        .flags()
        .iter()
        .map(|(k, v)| format!("--{k}={v}"))
        .collect();
    csv.meta(format!("command: {} {}", cmd.name(), flags.join(" ")));
}

pub fn execute(cmd: &Command) -> CliResult<Report> {
    let mut report = match cmd {
        Command::Risk(a) => cmd_risk(a)?.into(),
        Command::Crossover(a) => cmd_crossover(a)?.into(),
        Command::Regression(a) => cmd_regression(a)?.0.into(),
        Command::Validate(a) => cmd_validate(a)?,
        Command::Bounds(a) => cmd_bounds(a)?.into(),
    };
    let mut tagged = Csv::default();
    provenance(&mut tagged, cmd);
    report.csv.prepend_meta(tagged);
    Ok(report)
}

/// Runs the parsed command line, writing CSV to `--out` or standard output.
pub fn run(cli: &Cli) -> CliResult<()> {
    let report = execute(&cli.command)?;
    let text = report.csv.render();
    match &cli.command.common().out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    match report.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn crossover_config(d: usize, n: usize) -> CliResult<ModelConfig> {
    let c = ModelConfig::new(d, n)?;
    c.require(Regime::Crossover)?;
    Ok(c)
}

/// The evaluation points of `cmd_risk`.
pub fn rho_grid(d: usize, rho_min: Option<f64>, rho_max: f64, steps: usize) -> CliResult<Vec<f64>> {
    let lo = rho_min.unwrap_or(-1.0 / (d as f64 - 1.0) + 1e-6);
    if steps == 1 && lo == rho_max {
        return Ok(vec![lo]);
    }
    if !(lo < rho_max) || steps < 2 {
        return Err(CliError::Validation(format!(
            "rho grid needs rho-min < rho-max and steps >= 2 (got {lo}, {rho_max}, {steps})"
        )));
    }
    let step = (rho_max - lo) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                rho_max
            } else {
                lo + step * i as f64
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRow {
    pub rho: f64,
    pub r_hb: f64,
    pub r_phb: f64,
    pub h: f64,
    pub err: f64,
}

pub fn risk_rows(
    config: ModelConfig,
    rhos: &[f64],
    settings: &QuadratureSettings,
) -> CliResult<Vec<RiskRow>> {
    let rows = map_slice(rhos, |&rho| -> CliResult<RiskRow> {
        let cs = make_compound_symmetry(config.d(), config.n(), rho)?;
        let hb = risk_hb_cs(&cs)?;
        let phb = risk_phb_cs(&cs, settings)?;
        let h = risk_diff_h(&cs, settings)?;
        Ok(RiskRow {
            rho,
            r_hb: hb.value,
            r_phb: phb.value,
            h: h.value,
            err: h.err_estimate.max(phb.err_estimate),
        })
    });
    rows.into_iter().collect()
}

pub fn cmd_risk(a: &RiskArgs) -> CliResult<Csv> {
    let config = crossover_config(a.d, a.n)?;
    let s = settings(&a.common)?;
    let rhos = rho_grid(a.d, a.rho_min, a.rho_max, a.steps)?;
    let mut header = vec!["rho", "R_HB", "R_PHB", "H", "method", "err"];
    if a.relative_gain {
        header.push("gain_pct");
    }
    let mut csv = Csv::new(&header);
    for r in risk_rows(config, &rhos, &s)? {
        let mut cells = vec![
            num(r.rho),
            num(r.r_hb),
            num(r.r_phb),
            num(r.h),
            RiskMethod::Quadrature.to_string(),
            num(r.err),
        ];
        if a.relative_gain {
            cells.push(num(100.0 * (r.r_hb - r.r_phb) / r.r_phb));
        }
        csv.row(cells);
    }
    Ok(csv)
}

pub fn cmd_crossover(a: &CrossoverArgs) -> CliResult<Csv> {
    let config = crossover_config(a.d, a.n)?;
    let s = settings(&a.common)?;
    let c = solve_crossover(config, &s, a.solver_tol)?;
    let mut csv = Csv::new(&["d", "n", "rho_L", "rho_star", "rho_U", "residual"]);
    csv.meta(format!(
        "iterations: {} bracket: [{}, {}]",
        c.iterations,
        num(c.bracket.0),
        num(c.bracket.1)
    ));
    if !c.analytic_upper_held {
        let msg = format!(
            "warning: H(rho_U) <= 0 at d={}, n={}; rho_star lies above rho_U and was bracketed by extension",
            a.d, a.n
        );
        warn!("{msg}");
        csv.meta(msg);
    }
    csv.row(vec![
        a.d.to_string(),
        a.n.to_string(),
        num(c.bounds.rho_l),
        num(c.rho_star),
        num(c.bounds.rho_u),
        num(c.residual),
    ]);
    Ok(csv)
}

fn solve_crossover(
    config: ModelConfig,
    s: &QuadratureSettings,
    tol: f64,
) -> CliResult<CrossoverCertificate> {
    if !(tol > 0.0) {
        return Err(CliError::Validation(format!(
            "solver-tol must be positive, got {tol}"
        )));
    }
    let c = find_crossover(config, s, tol)?;
    if !(c.bounds.rho_l < c.rho_star) {
        return Err(CliError::Convergence(format!(
            "rho_star {} is not above rho_L {}",
            c.rho_star, c.bounds.rho_l
        )));
    }
    Ok(c)
}

fn parse_pairs(raw: &[String]) -> CliResult<Vec<(usize, usize)>> {
    raw.iter()
        .map(|p| {
            let bad = || CliError::Validation(format!("pair {p:?} is not of the form d:n"));
            let (d, n) = p.trim().split_once(':').ok_or_else(bad)?;
            Ok((d.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
        })
        .collect()
}

/// Solves `ρ*` for each pair, in parallel, keeping input order.
pub fn crossover_points(
    pairs: &[(usize, usize)],
    s: &QuadratureSettings,
    tol: f64,
) -> CliResult<Vec<(usize, usize, f64)>> {
    let solved = map_slice(pairs, |&(d, n)| -> CliResult<(usize, usize, f64)> {
        let c = solve_crossover(crossover_config(d, n)?, s, tol)?;
        Ok((d, n, c.rho_star))
    });
    solved.into_iter().collect()
}

pub fn cmd_regression(a: &RegressionArgs) -> CliResult<(Csv, RegressionResult)> {
    let s = settings(&a.common)?;
    let pairs = match &a.pairs {
        Some(raw) => parse_pairs(raw)?,
        None => default_lattice(),
    };
    if pairs.len() < MIN_REGRESSION_PAIRS {
        return Err(CliError::Validation(format!(
            "regression needs at least {MIN_REGRESSION_PAIRS} (d, n) pairs, got {}",
            pairs.len()
        )));
    }
    for &(d, n) in &pairs {
        crossover_config(d, n)?;
    }
    let base = if a.log10 {
        LogBase::Ten
    } else {
        LogBase::Natural
    };
    // Rank is checked before the expensive solves.
    fit(
        &pairs
            .iter()
            .map(|&(d, n)| (d, n, 1.0 / d as f64))
            .collect::<Vec<_>>(),
        base,
    )?;
    let points = crossover_points(&pairs, &s, a.solver_tol)?;
    let result = fit(&points, base)?;

    let mut csv = Csv::new(&["d", "n", "rho_star"]);
    csv.meta(format!(
        "regression: log_base={} num_points={} adjusted_r2={}",
        base.name(),
        result.num_points,
        num(result.adjusted_r2)
    ));
    for (j, name) in ["intercept", "log_d", "log_n"].iter().enumerate() {
        csv.meta(format!(
            "coefficient: {name} estimate={} std_error={} t={}",
            num(result.coefficients[j]),
            num(result.std_errors[j]),
            num(result.t_statistics[j])
        ));
    }
    for (d, n, r) in points {
        csv.row(vec![d.to_string(), n.to_string(), num(r)]);
    }
    Ok((csv, result))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub case: String,
    pub quadrature_value: f64,
    pub mc: McRiskEstimate,
    pub z_score: f64,
}

/// Independent per-case seeds derived from the plan seed.
fn case_seed(seed: u64, case: u64) -> u64 {
    let mut z = seed ^ case.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn push_rows(
    rows: &mut Vec<ValidationRow>,
    label: &str,
    quad: [Option<f64>; 3],
    mc: [Option<McRiskEstimate>; 3],
) {
    for (q, m) in quad.into_iter().zip(mc) {
        if let (Some(q), Some(m)) = (q, m) {
            rows.push(ValidationRow {
                case: format!("{}:{label}", m.tag),
                quadrature_value: q,
                mc: m,
                z_score: m.z_score(q),
            });
        }
    }
}

/// Quadrature against Monte Carlo for MLE, PHB and HB on every `(d, n, ρ)`,
/// plus optionally the perturbed case `d = 10, n = 2, ρ = 0.8, ν = B/2`.
pub fn validation_rows(
    ds: &[usize],
    ns: &[usize],
    rhos: &[f64],
    perturbed: bool,
    plan: SimPlan,
    s: &QuadratureSettings,
) -> CliResult<(Vec<ValidationRow>, usize)> {
    let mut rows = Vec::new();
    let mut degenerate = 0;
    let mut case = 0u64;
    for &d in ds {
        for &n in ns {
            for &rho in rhos {
                let cs = make_compound_symmetry(d, n, rho)?;
                let config = cs.config();
                config.require(Regime::Phb)?;
                let hb = (d >= Regime::Hb.min_d())
                    .then(|| risk_hb_cs(&cs))
                    .transpose()?;
                let phb = risk_phb_cs(&cs, s)?;
                let run = SimPlan {
                    seed: case_seed(plan.seed, case),
                    ..plan
                };
                let mc = mc_integrated_risk(&MuLaw::CompoundSymmetry(cs), &run, s)?;
                degenerate += mc.degenerate_events;
                push_rows(
                    &mut rows,
                    &format!("d={d}:n={n}:rho={rho}"),
                    [
                        Some(risk_mle(config).value),
                        Some(phb.value),
                        hb.map(|r| r.value),
                    ],
                    [Some(mc.mle), Some(mc.phb), mc.hb],
                );
                case += 1;
            }
        }
    }
    if perturbed {
        let base = make_compound_symmetry(10, 2, 0.8)?;
        let b = compute_bounds(base.config(), s)?.b;
        let ps = PerturbedSpectrum::with_bound(base, b / 2.0, b)?;
        let spec = perturb_spectrum(&ps);
        let hb = risk_hb_general(&spec, s)?;
        let phb = risk_phb_general(&spec, s)?;
        let run = SimPlan {
            seed: case_seed(plan.seed, case),
            ..plan
        };
        let mc = mc_integrated_risk(&MuLaw::Perturbed(ps), &run, s)?;
        degenerate += mc.degenerate_events;
        push_rows(
            &mut rows,
            "d=10:n=2:rho=0.8:nu=B/2",
            [
                Some(risk_mle(base.config()).value),
                Some(phb.value),
                Some(hb.value),
            ],
            [Some(mc.mle), Some(mc.phb), mc.hb],
        );
    }
    Ok((rows, degenerate))
}

pub fn cmd_validate(a: &ValidateArgs) -> CliResult<Report> {
    let s = settings(&a.common)?;
    let ds = a.d.clone().unwrap_or(DEFAULT_VALIDATE_D.to_vec());
    let ns = a.n.clone().unwrap_or(DEFAULT_VALIDATE_N.to_vec());
    let rhos = a.rho.clone().unwrap_or(DEFAULT_VALIDATE_RHO.to_vec());
    let mode = match a.mode {
        ModeArg::Plain => SimMode::Plain,
        ModeArg::RaoBlackwell => SimMode::RaoBlackwell,
    };
    let plan = SimPlan::new(a.replicates, a.seed).with_mode(mode);
    plan.validate()?;
    let (rows, degenerate) = validation_rows(&ds, &ns, &rhos, !a.no_perturbed, plan, &s)?;

    let mut csv = Csv::new(&["case", "quadrature_value", "mc_mean", "mc_se", "z_score"]);
    csv.meta(format!(
        "seed: {} replicates: {} mode: {:?}",
        a.seed, a.replicates, mode
    ));
    let mut worst: Option<&ValidationRow> = None;
    for r in &rows {
        csv.row(vec![
            r.case.clone(),
            num(r.quadrature_value),
            num(r.mc.mean),
            num(r.mc.std_error),
            num(r.z_score),
        ]);
        if r.z_score.abs() > Z_LIMIT && worst.is_none_or(|w| r.z_score.abs() > w.z_score.abs()) {
            worst = Some(r);
        }
    }
    let failure = if let Some(w) = worst {
        Some(CliError::McFailure(format!(
            "|z| = {} > {Z_LIMIT} for {}",
            w.z_score.abs(),
            w.case
        )))
    } else if degenerate > 0 {
        Some(CliError::McFailure(format!(
            "{degenerate} degenerate replicates"
        )))
    } else {
        None
    };
    Ok(Report { csv, failure })
}

pub fn cmd_bounds(a: &BoundsArgs) -> CliResult<Csv> {
    let config = crossover_config(a.d, a.n)?;
    let s = settings(&a.common)?;
    let mut header = vec!["d", "n", "alpha_d", "rho_L", "rho_U", "delta_star", "B"];
    let b = compute_bounds(config, &s)?;
    let mut cells = vec![
        a.d.to_string(),
        a.n.to_string(),
        num(b.alpha_d),
        num(b.rho_l),
        num(b.rho_u),
        num(b.delta_star),
        num(b.b),
    ];
    if let Some(nu) = a.nu {
        let p = compute_perturbed_bounds(config, nu, &s)?;
        header.extend([
            "nu",
            "beta_star",
            "alpha_star_d",
            "rho_tilde_L",
            "rho_tilde_U",
        ]);
        cells.extend([
            num(p.nu),
            num(p.beta_star),
            num(p.alpha_star_d),
            num(p.rho_tilde_l),
            num(p.rho_tilde_u),
        ]);
    }
    let mut csv = Csv::new(&header);
    csv.row(cells);
    Ok(csv)
}
