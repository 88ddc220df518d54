mod artifacts;
mod cmd;
mod error;
mod render;
mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use decomp_lab::finitedist::MetricKind;

use crate::error::{CliError, ExitCode};

#[derive(Parser, Debug)]
#[command(name = "decomp-lab", version, about = "Exact finite-domain composition/decomposition lab")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command. Values given here override the
/// corresponding fields of a config file.
#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving all artifacts
    #[arg(long, global = true, env = "DECOMP_LAB_OUT", default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads for independent trials (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Ground metric for adversarial losses
    #[arg(long, global = true)]
    pub metric: Option<MetricKind>,
    /// Weight of the cycle-consistency terms
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Optimizer tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Record the wall-clock time in the run manifest (breaks byte-identical reruns)
    #[arg(long, global = true)]
    pub wall_clock: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a scenario file
    Gen(cmd::gen::GenArgs),
    /// Run one of the four learning tasks on a scenario
    Solve(cmd::solve::SolveArgs),
    /// Check a theorem or the rank lemma
    Verify(cmd::verify::VerifyArgs),
    /// Build a certified non-identifiability example
    Counterexample(cmd::counterexample::CounterexampleArgs),
    /// Learn a sequence of components stage by stage
    Chain(cmd::chain::ChainArgs),
    /// Render SVG plots and CSV tables from report files
    Report(cmd::report::ReportArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            return Err(CliError::config("--jobs: must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new(ExitCode::Internal, format!("thread pool: {e}")))?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Gen(a) => cmd::gen::run(g, a),
        Command::Solve(a) => cmd::solve::run(g, a),
        Command::Verify(a) => cmd::verify::run(g, a),
        Command::Counterexample(a) => cmd::counterexample::run(g, a),
        Command::Chain(a) => cmd::chain::run(g, a),
        Command::Report(a) => cmd::report::run(g, a),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code as i32);
    }
}
