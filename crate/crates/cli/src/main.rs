//! `fourex`: Fourier extensions from the command line.
//!
//! Data goes to stdout (or `--out`), human-readable reports to stderr.
//! Exit codes: 0 ok, 1 usage or invalid parameters, 2 I/O or parse,
//! 3 not converged (output still written), 4 randomized sketch failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "fourex", version, about = "Fast Fourier extensions of arbitrary length")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a test function or a sample file; writes a coefficient file.
    Fit(FitArgs),
    /// Evaluate a coefficient file; CSV `x,re,im`.
    Eval(EvalArgs),
    /// Error versus half-bandwidth over a geometric grid.
    Sweep(SweepArgs),
    /// Singular values in the validated plunge window; CSV `index,sigma`.
    Plunge(PlungeArgs),
    /// Median solve times; CSV timing table.
    Bench(BenchArgs),
}

/// Extension parameters shared by the commands that build a problem.
#[derive(Debug, Args)]
struct ProblemArgs {
    /// Extension length `T > 1`, as `p/q` or a decimal.
    #[arg(long = "T", value_name = "T")]
    t: String,
    /// Oversampling factor `M / N` (approximately; `2Tm` must be an integer).
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Singular value cutoff.
    #[arg(long, default_value_t = fourex::params::DEFAULT_TAU)]
    tau: f64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("data").required(true).args(["func", "samples"])))]
struct FitArgs {
    /// `square`, `runge`, `abs`, or `sin:<omega>`.
    #[arg(long)]
    func: Option<String>,
    /// Sample file (`# fourex-samples v1, m=<int>`); fixes `m`, `--gamma` is ignored.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Half-bandwidth: frequencies `-n..=n`.
    #[arg(long)]
    n: usize,
    /// `explicit`, `implicit`, `dense`, `continuous-explicit`, `continuous-implicit`.
    #[arg(long, default_value = "explicit")]
    method: String,
    #[arg(long, env = "FOUREX_SEED", default_value_t = 0)]
    seed: u64,
    /// Coefficient file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("at").required(true).args(["points", "grid"])))]
struct EvalArgs {
    #[arg(long)]
    coeffs: PathBuf,
    /// One abscissa per line; blank lines and `#` comments are skipped.
    #[arg(long)]
    points: Option<PathBuf>,
    /// `P` equispaced points on `[-1, 1]`, endpoints included.
    #[arg(long, value_name = "P")]
    grid: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    func: String,
    /// Extension lengths; repeat the flag for several series.
    #[arg(long = "T", value_name = "T", required = true)]
    t: Vec<String>,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Scale `gamma` by `2/T` so that `L = 2Tm` matches the `T = 2` problem.
    #[arg(long)]
    fixed_length: bool,
    #[arg(long, default_value_t = fourex::params::DEFAULT_TAU)]
    tau: f64,
    #[arg(long = "Nmin", value_name = "N")]
    n_min: Option<usize>,
    #[arg(long = "Nmax", value_name = "N")]
    n_max: Option<usize>,
    #[arg(long, default_value_t = 10)]
    geom_steps: usize,
    /// Explicit half-bandwidths, comma separated; overrides the geometric grid.
    #[arg(long = "Nlist", value_name = "LIST", value_delimiter = ',')]
    n_list: Vec<usize>,
    /// Repeat the flag for several series.
    #[arg(long, default_value = "explicit")]
    method: Vec<String>,
    #[arg(long, env = "FOUREX_SEED", default_value_t = 0)]
    seed: u64,
    /// Rows computed in parallel; 1 keeps the timing column meaningful.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlungeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Half-bandwidths, comma separated.
    #[arg(long = "Nlist", value_name = "LIST", value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long, default_value = "explicit")]
    method: Vec<String>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value = "square")]
    func: String,
    #[arg(long, env = "FOUREX_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Plunge(a) => commands::plunge(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fourex: {e}");
            ExitCode::from(e.code())
        }
    }
}
