use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Build, solve, check and time optimization models.
#[derive(Debug, Parser)]
#[command(name = "amlkit", version, about, propagate_version = true)]
pub struct Cli {
    /// TOML file with tolerance, thread and per-family parameter overrides.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the standard form of a benchmark model as JSON.
    Generate(GenerateArgs),
    /// Solve a benchmark model or a standard-form JSON file.
    Solve(SolveArgs),
    /// Verify derivatives and Hessian coloring against finite differences.
    Check(CheckArgs),
    /// Time model build, extraction and derivative evaluation; emit CSV.
    Bench(BenchArgs),
}

/// Model size parameters. Families read the ones they use:
/// mincostflow `--n` (default 5, the example network), lqcp `--n`/`--m`
/// (default 4, `m` defaults to `n`), fac `--g`/`--f` (default 1 and 2),
/// clnlbeam `--n` (default 5), quadexample `--d` (default 3), l2ball `--n`
/// (default 2). sqrt takes none.
#[derive(Debug, Clone, Default, Args)]
pub struct SizeArgs {
    #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Option<u64>,
    #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: Option<u64>,
    #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub g: Option<u64>,
    #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub f: Option<u64>,
    #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub d: Option<u64>,
    /// Use the family's default instance (the example network for mincostflow).
    #[arg(long = "default")]
    pub use_default: bool,
}

impl SizeArgs {
    /// Whether any explicit size flag was given.
    pub fn any(&self) -> bool {
        [self.n, self.m, self.g, self.f, self.d].iter().any(Option::is_some)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// mincostflow, lqcp, fac, clnlbeam, quadexample, l2ball or sqrt.
    #[arg(value_name = "FAMILY", required_unless_present = "family")]
    pub target: Option<String>,
    #[arg(long, conflicts_with = "target")]
    pub family: Option<String>,
    #[command(flatten)]
    pub size: SizeArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// LP for linear models, cutting planes for cones and nonlinear rows,
    /// branch-and-bound when binaries are present.
    Auto,
    Simplex,
    CuttingPlane,
    Bnb,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// A family name or a path to a standard-form JSON file.
    #[arg(value_name = "FAMILY|FILE", required_unless_present = "family")]
    pub target: Option<String>,
    #[arg(long, conflicts_with = "target")]
    pub family: Option<String>,
    #[command(flatten)]
    pub size: SizeArgs,
    /// Cut feasibility tolerance [default: 1e-6, or `tol` from the config].
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    /// Print one line per cutting-plane iteration to standard error.
    #[arg(long)]
    pub trace: bool,
    /// Re-solve over a grid, `PARAM=V1,V2,...` with PARAM one of n, m, g, f,
    /// d or tol; writes one CSV row per solve.
    #[arg(long, value_name = "PARAM=VALUES")]
    pub sweep: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// A family name, or `fig4` for the five-variable coloring example.
    #[arg(value_name = "FAMILY", required_unless_present = "family")]
    pub target: Option<String>,
    #[arg(long, conflicts_with = "target")]
    pub family: Option<String>,
    #[command(flatten)]
    pub size: SizeArgs,
    /// Seed for the random evaluation points [default: 1, or `seed` from the config].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random points per check.
    #[arg(long, default_value_t = 5)]
    pub points: usize,
    /// Print the Hessian coloring: classes, seed vectors and plan length.
    #[arg(long)]
    pub dump_coloring: bool,
    /// Debugging aid: perturb every computed gradient so the check must fail.
    #[arg(long, hide = true)]
    pub corrupt_derivative: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Families to time, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub family: Vec<String>,
    /// Sizes to time for every family, comma separated.
    #[arg(long, value_delimiter = ',', required = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub sizes: Vec<u64>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
