use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "hbrisk",
    version,
    about = "Integrated risk of HB and PHB estimators, as CSV"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Risk curves R_HB, R_PHB and H over a grid of rho.
    Risk(RiskArgs),
    /// The crossover correlation rho* with its analytic bracket.
    Crossover(CrossoverArgs),
    /// Regression of log rho* on log d and log n over many (d, n).
    Regression(RegressionArgs),
    /// Monte Carlo check of the quadrature risks.
    Validate(ValidateArgs),
    /// The bracketing constants, optionally for a perturbed spectrum.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Relative tolerance of every quadrature.
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RiskArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    /// Defaults to -1/(d-1) + 1e-6.
    #[arg(long, allow_hyphen_values = true)]
    pub rho_min: Option<f64>,
    #[arg(long, default_value_t = 0.99, allow_hyphen_values = true)]
    pub rho_max: f64,
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    /// Append the column 100 (R_HB - R_PHB) / R_PHB.
    #[arg(long)]
    pub relative_gain: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct CrossoverArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub solver_tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct RegressionArgs {
    /// Comma-separated d:n pairs; the default 25 x 20 log-uniform lattice when absent.
    #[arg(long, value_delimiter = ',')]
    pub pairs: Option<Vec<String>>,
    /// Use base-10 logarithms instead of natural ones.
    #[arg(long)]
    pub log10: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub solver_tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Plain,
    #[value(name = "rao_blackwell")]
    RaoBlackwell,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Group counts; defaults to 5,10,20.
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    /// Replicate counts; defaults to 1,5.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Correlations; defaults to -0.05,0,0.3,0.7.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::RaoBlackwell)]
    pub mode: ModeArg,
    /// Skip the perturbed-spectrum case.
    #[arg(long)]
    pub no_perturbed: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    /// Perturbation of the largest eigenvalue, in (0, B).
    #[arg(long)]
    pub nu: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Risk(_) => "risk",
            Command::Crossover(_) => "crossover",
            Command::Regression(_) => "regression",
            Command::Validate(_) => "validate",
            Command::Bounds(_) => "bounds",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Risk(a) => &a.common,
            Command::Crossover(a) => &a.common,
            Command::Regression(a) => &a.common,
            Command::Validate(a) => &a.common,
            Command::Bounds(a) => &a.common,
        }
    }

    /// Every effective flag value, for the CSV metadata.
    pub fn flags(&self) -> Vec<(&'static str, String)> {
        let c = self.common();
        let mut f = match self {
            Command::Risk(a) => vec![
                ("d", a.d.to_string()),
                ("n", a.n.to_string()),
                (
                    "rho-min",
                    a.rho_min.map_or("auto".into(), |v| v.to_string()),
                ),
                ("rho-max", a.rho_max.to_string()),
                ("steps", a.steps.to_string()),
                ("relative-gain", a.relative_gain.to_string()),
            ],
            Command::Crossover(a) => vec![
                ("d", a.d.to_string()),
                ("n", a.n.to_string()),
                ("solver-tol", a.solver_tol.to_string()),
            ],
            Command::Regression(a) => vec![
                (
                    "pairs",
                    a.pairs.as_ref().map_or("default".into(), |p| p.join(" ")),
                ),
                ("log10", a.log10.to_string()),
                ("solver-tol", a.solver_tol.to_string()),
            ],
            Command::Validate(a) => vec![
                ("d", list(&a.d, "5 10 20")),
                ("n", list(&a.n, "1 5")),
                ("rho", list(&a.rho, "-0.05 0 0.3 0.7")),
                ("replicates", a.replicates.to_string()),
                ("seed", a.seed.to_string()),
                ("mode", format!("{:?}", a.mode)),
                ("no-perturbed", a.no_perturbed.to_string()),
            ],
            Command::Bounds(a) => vec![
                ("d", a.d.to_string()),
                ("n", a.n.to_string()),
                ("nu", a.nu.map_or("none".into(), |v| v.to_string())),
            ],
        };
        f.push(("rel-tol", c.rel_tol.to_string()));
        f.push((
            "out",
            c.out
                .as_ref()
                .map_or("stdout".into(), |p| p.display().to_string()),
        ));
        f
    }
}

fn list<T: ToString>(v: &Option<Vec<T>>, default: &str) -> String {
    v.as_ref().map_or(default.into(), |v| {
        v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
    })
}
