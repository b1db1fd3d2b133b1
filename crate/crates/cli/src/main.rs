use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::Failure;

#[derive(Parser)]
#[command(name = "imgconn", version, about = "Property testers for connectedness of binary images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance as a PBM image with a JSON sidecar.
    Gen(GenArgs),
    /// Run the tester repeatedly on one image and summarise.
    Test(TestArgs),
    /// Measure query counts across a list of proximity parameters.
    Sweep(SweepArgs),
    /// Sum local costs over all squares and check the component bound.
    Audit(AuditArgs),
    /// Evaluate a query strategy against the hard distribution.
    Lowerbound(LowerboundArgs),
    /// Exact distances to connectedness for tiny images.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct EpsArg {
    /// Proximity parameter, `1/N` or `2^-j` with N a power of two.
    #[arg(long)]
    eps: String,
    /// Round a non-dyadic `--eps` down to a power of two instead of failing.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// A connected image from one of the connected families.
    Connected {
        #[arg(long, value_parser = parse_connected)]
        family: imgconn::lab::ConnectedFamily,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        common: GenCommon,
    },
    /// Isolated dots, certified far by their component count.
    Dots {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        eps: EpsArg,
        #[command(flatten)]
        common: GenCommon,
    },
    /// A sample from the lower-bound hard distribution.
    Hard {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        eps: EpsArg,
        #[command(flatten)]
        common: GenCommon,
    },
}

#[derive(Args)]
struct GenCommon {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output PBM path; the sidecar goes next to it with `.json` appended.
    #[arg(long)]
    out: PathBuf,
    /// Write plain `P1` instead of raw `P4`.
    #[arg(long)]
    plain: bool,
}

#[derive(Args)]
struct Source {
    /// PBM image to test.
    #[arg(long, conflicts_with = "procedural")]
    image: Option<PathBuf>,
    /// A procedural image instead of a file.
    #[arg(long, value_parser = parse_procedural, requires = "n")]
    procedural: Option<imgconn::lab::ProceduralFamily>,
    /// Side of the procedural image.
    #[arg(long)]
    n: Option<usize>,
    /// Seed of the procedural image.
    #[arg(long, default_value_t = 0)]
    image_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Nonadaptive,
    Adaptive,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "adaptive")]
    variant: VariantArg,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Root seed; trial `i` derives its own seed from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Adaptive query cap: `auto`, `unlimited`, or a number.
    #[arg(long, default_value = "auto")]
    budget: String,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    eps: EpsArg,
    #[command(flatten)]
    run: RunArgs,
    /// Skip re-checking rejection certificates.
    #[arg(long)]
    no_verify: bool,
    /// Also list every trial's outcome.
    #[arg(long)]
    per_trial: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated proximity parameters; may be empty.
    #[arg(long, default_value = "")]
    eps_list: String,
    /// white, comb, dots, blob, rectangles, serpentine, or dot-far.
    #[arg(long, default_value = "white")]
    family: String,
    /// Image side for every row; defaults to the smallest side meeting the
    /// premise for each ε.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    image_seed: u64,
    #[command(flatten)]
    run: RunArgs,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    /// Closed-form costs for sparse dot patterns, brute force on tiny squares.
    Dots,
    /// Brute force only; squares with side above 4 are unavailable.
    Brute,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    eps: EpsArg,
    #[arg(long, value_enum, default_value = "dots")]
    provider: ProviderArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LowerboundArgs {
    /// uniform, bridge-focused, or grid-focused; ignored with `--queries`.
    #[arg(long, default_value = "uniform")]
    strategy: String,
    /// JSON array of `{"x":..,"y":..}` pixels to use as the query set.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Number of queries taken from the strategy's ordering.
    #[arg(long, default_value_t = 0)]
    q: usize,
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value = "2^-16")]
    eps: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trials for the cross-check; 0 skips it.
    #[arg(long, default_value_t = 10_000)]
    mc_trials: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    image: PathBuf,
    /// Distance to border-connectedness instead of connectedness.
    #[arg(long)]
    border: bool,
}

fn parse_connected(s: &str) -> Result<imgconn::lab::ConnectedFamily, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_procedural(s: &str) -> Result<imgconn::lab::ProceduralFamily, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Test(a) => commands::test(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Audit(a) => commands::audit(a),
        Command::Lowerbound(a) => commands::lowerbound(a),
        Command::Oracle(a) => commands::oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(e)) => {
            eprintln!("invariant violated: {e:#}");
            ExitCode::from(3)
        }
    }
}
