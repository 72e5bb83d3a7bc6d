use clap::{Args, Parser, Subcommand, ValueEnum};
use ladroot::ar1::{OutlierMode, DEFAULT_TAIL_TOL};
use ladroot::{InnovationKind, OutlierPlacement, Preset, Reference, Statistic};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "ladroot",
    version,
    about = "LAD and OLS estimation for near-unit-root AR(1) processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one series and write it as CSV
    Gen(GenArgs),
    /// Fit LAD and OLS to a series CSV
    Fit(FitArgs),
    /// Run a Monte Carlo experiment or a named preset
    Exp(ExpArgs),
    /// Draw from the limit laws D(gamma) and L(gamma)
    Limit(LimitArgs),
    /// Run the deterministic identity checks
    Verify(VerifyArgs),
    /// Re-run the command recorded in a manifest
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Zero,
    FullPast,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InnovationArg {
    Normal,
    Uniform,
}

impl From<InnovationArg> for InnovationKind {
    fn from(a: InnovationArg) -> Self {
        match a {
            InnovationArg::Normal => InnovationKind::StandardNormal,
            InnovationArg::Uniform => InnovationKind::UniformPm1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    Innovation,
    Observed,
}

impl From<PlacementArg> for OutlierPlacement {
    fn from(a: PlacementArg) -> Self {
        match a {
            PlacementArg::Innovation => OutlierPlacement::Innovation,
            PlacementArg::Observed => OutlierPlacement::Observed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    None,
    Normal,
    Cauchy,
}

impl From<ReferenceArg> for Reference {
    fn from(a: ReferenceArg) -> Self {
        match a {
            ReferenceArg::None => Reference::None,
            ReferenceArg::Normal => Reference::StdNormal,
            ReferenceArg::Cauchy => Reference::StdCauchy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Gaussian,
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// `none`, `const:VALUE:FRAC` or `scaledmax:MULT:FRAC`.
pub fn parse_outliers(s: &str) -> Result<OutlierMode, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| {
        p.parse::<f64>()
            .map_err(|_| format!("`{p}` is not a number"))
    };
    match parts.as_slice() {
        ["none"] => Ok(OutlierMode::None),
        ["const", v, f] => Ok(OutlierMode::AdditiveConstant {
            value: num(v)?,
            fraction: num(f)?,
        }),
        ["scaledmax", m, f] => Ok(OutlierMode::AdditiveScaledMax {
            multiple: num(m)?,
            fraction: num(f)?,
        }),
        _ => Err(format!(
            "`{s}` is not none, const:VALUE:FRAC or scaledmax:MULT:FRAC"
        )),
    }
}

pub fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
}

pub fn parse_statistic(s: &str) -> Result<Statistic, String> {
    s.parse()
}

/// Model knobs shared by `gen` and `exp`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = InnovationArg::Normal)]
    pub innovation: InnovationArg,
    #[arg(long, value_enum, default_value_t = InitArg::Zero)]
    pub init: InitArg,
    /// Exponent of the truncation length `kappa_n = floor(n^e)`.
    #[arg(long, default_value_t = 1.3)]
    pub kappa_exp: f64,
    /// Tail tolerance for the full-past start with non-normal innovations.
    #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
    pub tail_tol: f64,
    #[arg(long, value_parser = parse_outliers, default_value = "none")]
    pub outliers: OutlierMode,
    #[arg(long, value_enum, default_value_t = PlacementArg::Innovation)]
    pub outlier_placement: PlacementArg,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Replication index whose streams are used.
    #[arg(long, default_value_t = 0)]
    pub replication: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Series CSV with a `y` column (`i = 0` row holds `y_0`).
    #[arg(long)]
    pub input: PathBuf,
    /// Reference root for `T_n`.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ExpArgs {
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Statistics that get density, Q-Q and KS output.
    #[arg(long = "stat", value_parser = parse_statistic, value_delimiter = ',')]
    pub statistics: Vec<Statistic>,
    #[arg(long, value_enum, default_value_t = ReferenceArg::None)]
    pub reference: ReferenceArg,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct LimitArgs {
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = RouteArg::Gaussian)]
    pub route: RouteArg,
    /// Sample size of the finite-AR route.
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid size; defaults to max(2000, 40|gamma|) on the Gaussian route and n on the AR route.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// `E|eps|` of the innovations (Gaussian route only).
    #[arg(long)]
    pub mean_abs: Option<f64>,
    /// `f(0)` of the innovations (Gaussian route only).
    #[arg(long)]
    pub f0: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Write `verify.json` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Debug hook: offset added to lambda12 before the weight identities are checked.
    #[arg(long, hide = true, default_value_t = 0.0, allow_hyphen_values = true)]
    pub debug_lambda12_offset: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}
