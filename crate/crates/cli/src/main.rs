//! `catdp` command-line front end.
//!
//! Exit status: 0 private or success, 1 not private, 2 input error,
//! 3 budget exceeded.

mod bench;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "catdp", version, about = "Differentially private sanitisation of categorical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide (ε, δ)-differential privacy of a mechanism spec.
    Verify(VerifyArgs),
    /// Sanitise one categorical CSV column.
    Sanitize(SanitizeArgs),
    /// Expected hamming error of a mechanism and the error bounds.
    Analyze(AnalyzeArgs),
    /// Rewrite a hamming exponential spec as its symmetric product spec, or back.
    Convert(ConvertArgs),
    /// The least-error symmetric solution matrix for (ε, δ).
    Optimal(OptimalArgs),
    /// Compare reduced and brute-force verification over an (n, m) grid.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Worker threads for verification (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Largest (m+1)^n that may be enumerated.
    #[arg(long = "budget-enum", default_value_t = 1 << 20)]
    budget_enum: u64,
    /// Largest ground set whose subsets may be enumerated.
    #[arg(long = "budget-subsets", default_value_t = 24)]
    budget_subsets: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    pub fn budget(&self) -> catdp::Budget {
        catdp::Budget {
            databases: self.budget_enum,
            subset_elements: self.budget_subsets,
        }
    }
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, required_unless_present = "exp_epsilon", conflicts_with = "exp_epsilon")]
    epsilon: Option<f64>,
    /// δ; a fraction such as 1/4 is kept exact under --exact.
    #[arg(long)]
    delta: String,
    /// Rational arithmetic throughout.
    #[arg(long)]
    exact: bool,
    /// e^ε as a rational, for --exact (implies it).
    #[arg(long = "exp-epsilon")]
    exp_epsilon: Option<String>,
    /// Run the exhaustive oracle instead of the sufficient-set verifier.
    #[arg(long)]
    bruteforce: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
pub struct SanitizeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Column name, or zero-based index; the first column by default.
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    seed: u64,
    /// The data file has no header line.
    #[arg(long = "no-header")]
    no_header: bool,
    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
pub struct OptimalArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    /// Number of categories minus one.
    #[arg(long, required_unless_present = "spec", conflicts_with = "spec")]
    m: Option<usize>,
    /// Take m from this spec's category set.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Also write the matrix as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Grid points as n:m pairs.
    #[arg(long, value_delimiter = ',', default_value = "1:1,1:2,2:1,2:2,3:1,1:4")]
    grid: Vec<String>,
    #[arg(long, value_enum, default_value_t = bench::BenchUtility::L1)]
    utility: bench::BenchUtility,
    /// Hamming steepness; ε by default.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Seeds the random utility tables.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

/// Command failure carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub status: u8,
    pub message: String,
}

impl From<catdp::Error> for Failure {
    fn from(e: catdp::Error) -> Self {
        Failure {
            status: if e.is_budget() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<catdp::Error>() {
            Some(inner) => Failure {
                status: if inner.is_budget() { 3 } else { 2 },
                message: format!("{e:#}"),
            },
            None => Failure {
                status: 2,
                message: format!("{e:#}"),
            },
        }
    }
}

fn set_threads(common: &Common) -> Result<(), Failure> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure {
                status: 2,
                message: format!("thread pool: {e}"),
            })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Verify(a) => &a.common,
        Command::Sanitize(a) => &a.common,
        Command::Analyze(a) => &a.common,
        Command::Convert(a) => &a.common,
        Command::Optimal(a) => &a.common,
        Command::Bench(a) => &a.common,
    };
    let result = set_threads(common).and_then(|()| match &cli.command {
        Command::Verify(a) => commands::verify(a),
        Command::Sanitize(a) => commands::sanitize(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Convert(a) => commands::convert(a),
        Command::Optimal(a) => commands::optimal(a),
        Command::Bench(a) => bench::run(a),
    });
    match result {
        Ok(status) => ExitCode::from(status),
        Err(f) => {
            eprintln!("catdp: {}", f.message);
            ExitCode::from(f.status)
        }
    }
}
