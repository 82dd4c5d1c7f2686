//! Command-line driver for the thermoelastic-beam experiments.

mod commands;
mod common;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::common::{RunContext, EXIT_USAGE};
use crate::config::Config;

#[derive(Parser)]
#[command(
    name = "thermobeam",
    version,
    about = "Spectral simulator and verification experiments for an extensible thermoelastic beam"
)]
struct Cli {
    /// Key-value configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSVs, summaries and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Base seed; fully determines every ensemble.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for ensemble experiments (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and stream its diagnostics to CSV.
    Simulate,
    /// Enumerate the stationary set of the elliptic problem.
    Stationary,
    /// Co-integrate the decaying/regular split of the shifted semigroup.
    Decompose,
    /// Backward-uniqueness ratio diagnostic for a perturbed pair.
    BackwardCheck,
    /// Worst-case comparison run for the superlinear absorbing lemma.
    GronwallCheck {
        #[arg(long = "K", default_value_t = 0.0)]
        k: f64,
        #[arg(long = "Q", default_value_t = 0.0)]
        q: f64,
        #[arg(long, default_value_t = 0.5)]
        eps0: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda0: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
    },
    /// Entering-time table of the absorbing set over an energy ladder.
    Absorb,
    /// Ensemble convergence to the stationary set.
    Attract,
    /// Uniformity of the dynamics across the rotational parameter.
    GammaSweep,
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    let threads = cli.threads.unwrap_or_else(num_threads);
    // ensemble results are merged in member order, so the thread count only
    // affects scheduling, never the output bytes
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    let ctx = RunContext::new(cfg, cli.out, cli.seed, threads)?;
    match cli.cmd {
        Command::Simulate => commands::cmd_simulate(&ctx),
        Command::Stationary => commands::cmd_stationary(&ctx),
        Command::Decompose => commands::cmd_decompose(&ctx),
        Command::BackwardCheck => commands::cmd_backward_check(&ctx),
        Command::GronwallCheck {
            k,
            q,
            eps0,
            lambda0,
            horizon,
        } => commands::cmd_gronwall_check(&ctx, k, q, eps0, lambda0, horizon),
        Command::Absorb => commands::cmd_absorb(&ctx),
        Command::Attract => commands::cmd_attract(&ctx),
        Command::GammaSweep => commands::cmd_gamma_sweep(&ctx),
    }
}

fn num_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
