mod commands;
mod input;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Failure;
use crate::input::SpecArgs;

/// Evaluate mixed sum/max convolution recurrences and bound their growth rate.
#[derive(Debug, Parser)]
#[command(name = "convgrowth", version, about)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print s_0..s_N.
    Eval(EvalArgs),
    /// Lower and upper bounds on the growth rate from s_0..s_N.
    Bounds(BoundsArgs),
    /// Double N until the bounds are within a factor 1 + epsilon.
    Refine(RefineArgs),
    /// Cross-check the engine against exhaustive composition-tree enumeration.
    Oracle(OracleArgs),
    /// Check that a classical sequence's known growth rate is bracketed.
    Known(KnownArgs),
    /// Time the engine at N and 2N and report the scaling exponent.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Exact,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
    Bfile,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Numeric backend.
    #[arg(long, value_enum, default_value_t = DomainArg::Log)]
    pub domain: DomainArg,

    /// Cache file to resume from and update.
    #[arg(long, value_name = "PATH")]
    pub cache: Option<std::path::PathBuf>,

    /// Directory for caches named after the recurrence digest; used when
    /// --cache is absent.
    #[arg(long, value_name = "DIR", env = "CONVGROWTH_CACHE_DIR")]
    pub cache_dir: Option<std::path::PathBuf>,

    /// Memory cap for the sequence tables, in bytes (suffixes K, M, G).
    #[arg(long, value_name = "BYTES", value_parser = input::parse_bytes)]
    pub memory_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub spec: SpecArgs,

    /// Largest index to compute.
    #[arg(long)]
    pub n: usize,

    #[command(flatten)]
    pub table: TableArgs,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub spec: SpecArgs,

    /// Largest index to compute; at least 2.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub n: u64,

    /// Report the bounds at every n instead of at powers of two.
    #[arg(long)]
    pub all: bool,

    #[command(flatten)]
    pub table: TableArgs,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[command(flatten)]
    pub spec: SpecArgs,

    /// Target: upper / lower <= 1 + epsilon.
    #[arg(long, default_value_t = convgrowth::bounds::DEFAULT_EPSILON)]
    pub epsilon: f64,

    /// Largest N to try.
    #[arg(long, default_value_t = convgrowth::bounds::DEFAULT_MAX_N)]
    pub max_n: usize,

    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub seconds: Option<f64>,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub spec: SpecArgs,

    /// Largest tree size to check.
    #[arg(long, default_value_t = convgrowth::oracle::DEFAULT_VERTEX_CAP)]
    pub max_n: usize,

    /// Allow --max-n above the default cap; runtime grows exponentially.
    #[arg(long)]
    pub allow_large: bool,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KnownName {
    Catalan,
    Schroeder,
    Kfold,
    All,
}

#[derive(Debug, Args)]
pub struct KnownArgs {
    /// Which sequence to check.
    #[arg(value_enum)]
    pub name: KnownName,

    /// Number of folds for kfold.
    #[arg(long, default_value_t = 3)]
    pub k: usize,

    #[arg(long, default_value_t = convgrowth::bounds::DEFAULT_EPSILON)]
    pub epsilon: f64,

    #[arg(long, default_value_t = convgrowth::bounds::DEFAULT_MAX_N)]
    pub max_n: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub spec: SpecArgs,

    /// Base size; the engine is timed at N and 2N.
    #[arg(long, default_value_t = 2048)]
    pub n: usize,

    #[arg(long, value_enum, default_value_t = DomainArg::Log)]
    pub domain: DomainArg,

    /// Runs per size; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Eval(args) => commands::eval(args),
        Command::Bounds(args) => commands::bounds(args),
        Command::Refine(args) => commands::refine(args),
        Command::Oracle(args) => commands::oracle(args),
        Command::Known(args) => commands::known(args),
        Command::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            if let Some(error) = error {
                eprintln!("error: {error:#}");
            }
            ExitCode::from(code)
        }
    }
}
