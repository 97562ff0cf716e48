use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "starcount", version, about = "Lattice point counts in star bodies and reciprocal sums")]
pub struct Cli {
    /// JSON experiment configuration (read by `experiment`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for sampled quantities; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the config file.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output path prefix; files get `.csv`, `.json` or `.gp` appended.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count integer points q with prod ||L_i q|| < eps, |L_i q| <= R, |q_j| <= T_j.
    Count(CountArgs),
    /// Evaluate S, S* or Sigma, optionally with the range split.
    Sum(SumArgs),
    /// Certify a lower bound phi for L over a finite box, or estimate c(alpha).
    Certify(CertifyArgs),
    /// List the tiles covering H1 or H2.
    Tess(TessArgs),
    /// Exact successive minima of the lattice attached to L.
    Minima(MinimaArgs),
    /// Weight schedule of a support matrix.
    Weights(WeightsArgs),
    /// Dyadic moment sums and exceptional sets.
    Schmidt(SchmidtArgs),
    /// Run a configured experiment and write its report.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CountMethod {
    Brute,
    Tile,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    /// Matrix rows separated by `;`, entries by `,`; `p/q` entries are exact.
    #[arg(long)]
    pub l: String,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub r: f64,
    /// Box sides, comma separated.
    #[arg(long)]
    pub t: String,
    #[arg(long, value_enum, default_value = "brute")]
    pub method: CountMethod,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SumKind {
    S,
    SStar,
    Sigma,
}

#[derive(Debug, Args)]
pub struct SumArgs {
    #[arg(long, value_enum)]
    pub kind: SumKind,
    /// Coordinates of alpha, comma separated (for `s` and `s-star`).
    #[arg(long)]
    pub alpha: Option<String>,
    /// Matrix for `sigma`.
    #[arg(long)]
    pub l: Option<String>,
    /// Box sides (or the single bound for `s-star`), comma separated.
    #[arg(long)]
    pub t: String,
    /// Also report the three-range split.
    #[arg(long)]
    pub split: bool,
    /// Split constant; defaults to n(n+1).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Joint,
    Dual,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Matrix to certify.
    #[arg(long)]
    pub l: Option<String>,
    /// `const:C` or `log:C:P`.
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub qmax: u64,
    /// Estimate c(alpha) for this alpha instead of certifying.
    #[arg(long)]
    pub estimate: Option<String>,
    #[arg(long, value_enum, default_value = "joint")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DomainArg {
    H1,
    H2,
}

#[derive(Debug, Args)]
pub struct TessArgs {
    #[arg(long, value_enum)]
    pub domain: DomainArg,
    /// Dimension of H1.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub r: f64,
    /// Bounds T_i of H2, comma separated.
    #[arg(long)]
    pub t: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    Upper,
    Dual,
}

#[derive(Debug, Args)]
pub struct MinimaArgs {
    #[arg(long)]
    pub l: String,
    #[arg(long, value_enum, default_value = "upper")]
    pub orientation: OrientationArg,
    /// Natural-log scale exponents applied to the coordinates, comma separated.
    #[arg(long)]
    pub scale: Option<String>,
    /// Also report a support-monotone basis built from the realizers.
    #[arg(long)]
    pub monotone: bool,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub m: usize,
    /// 0/1 rows separated by `;`, e.g. `1,0;1,1`.
    #[arg(long, conflicts_with = "file")]
    pub rows: Option<String>,
    /// CSV file with one 0/1 row per line.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Last row of the schedule; defaults to m + n - 1.
    #[arg(long)]
    pub sigma: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SchmidtArgs {
    /// Dyadic depths, one per index, comma separated.
    #[arg(long)]
    pub s: String,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    /// `const`, `alt`, `lattice[:EPS]`, `rademacher`, `zero` or `powerdiff:R`.
    #[arg(long, default_value = "const")]
    pub family: String,
    #[arg(long, default_value_t = 1000)]
    pub samples: u64,
    /// Use the power weighting with this exponent.
    #[arg(long)]
    pub power: Option<u32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Gnuplot,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Output formats, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json,gnuplot")]
    pub format: Vec<FormatArg>,
}
