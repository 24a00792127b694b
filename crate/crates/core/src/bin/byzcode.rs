use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use byzcode::commands::{self, SimulateConfig};

/// Rate limits and protocol simulation for distributed source coding with
/// Byzantine sensors.
#[derive(Parser)]
#[command(name = "byzcode", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropies of every sensor subset and pairwise information.
    Info {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Minimum achievable sum rate with up to t traitors.
    Maxent {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        t: usize,
        /// Write the maximizing distribution here.
        #[arg(long)]
        q_out: Option<PathBuf>,
    },
    /// Fixed-rate achievable regions.
    Regions {
        #[command(subcommand)]
        command: RegionsCommand,
    },
    /// Monte Carlo runs of the variable-rate protocol.
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum RegionsCommand {
    /// Whether a rate point is achievable.
    Check {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        t: usize,
        /// Comma-separated rates, one per sensor.
        #[arg(long)]
        rates: String,
        /// dfr (deterministic encoders) or rfr (randomized).
        #[arg(long, default_value = "rfr")]
        mode: String,
    },
    /// Minimum sum rate over the region of k-subsets.
    Minsum {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        k: usize,
    },
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, default_value_t = 0)]
    t: usize,
    /// Comma-separated 1-based sensor numbers.
    #[arg(long, default_value = "")]
    traitors: String,
    /// honest, gibberish, fabricate or collide.
    #[arg(long, default_value = "honest")]
    strategy: String,
    /// Fabrication distribution, required by the fabricate strategy.
    #[arg(long)]
    qtilde: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Binning functions per phase.
    #[arg(long = "C", default_value_t = 64)]
    functions: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance of the end-of-round typicality test (default 2 eps).
    #[arg(long)]
    typicality_eps: Option<f64>,
    /// Report JSON; printed to stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    let text = match cli.command {
        Command::Info { dist, json } => commands::info(&commands::load_pmf(&dist)?, json)?,
        Command::Maxent { dist, t, q_out } => {
            commands::maxent(&commands::load_pmf(&dist)?, t, q_out.as_deref())?
        }
        Command::Regions { command } => match command {
            RegionsCommand::Check {
                dist,
                t,
                rates,
                mode,
            } => commands::regions_check(&commands::load_pmf(&dist)?, t, &rates, &mode)?,
            RegionsCommand::Minsum { dist, k } => {
                commands::regions_minsum(&commands::load_pmf(&dist)?, k)?
            }
        },
        Command::Simulate(a) => {
            let print = a.out.is_none();
            let cfg = SimulateConfig {
                dist: a.dist,
                t: a.t,
                traitors: a.traitors,
                strategy: a.strategy,
                qtilde: a.qtilde,
                k: a.k,
                rounds: a.rounds,
                eps: a.eps,
                functions: a.functions,
                trials: a.trials,
                seed: a.seed,
                typicality_eps: a.typicality_eps,
                out: a.out,
                log: a.log,
                threads: commands::threads_from_env()?,
            };
            let result = commands::simulate(&cfg)?;
            if print {
                result.report_json
            } else {
                let s = &result.summary;
                format!(
                    "{} trials: honest error {:.4}, mean sum rate {:.4} bits/symbol\n",
                    s.trials, s.honest_error_rate.mean, s.sum_rate.mean
                )
            }
        }
    };
    std::io::stdout()
        .write_all(text.as_bytes())
        .context("cannot write to stdout")
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
