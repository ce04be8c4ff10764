use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wgarch_cli::commands::{
    cmd_aggregate, cmd_disaggregate, cmd_discretize, cmd_limit, cmd_price, cmd_simulate,
    cmd_smile, CliError, Ctx,
};

/// Weak-GARCH toolkit: temporal aggregation, the continuous limit and
/// its exact discretization, Monte Carlo pricing, and smile plots.
#[derive(Parser)]
#[command(name = "wgarch", version, max_term_width = 100)]
struct Cli {
    /// Input config (strict JSON; format depends on the subcommand)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (created if missing)
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Overrides the seed in the config
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads; affects speed only, never results
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate discrete parameters up to a coarser step
    Aggregate {
        /// Target step length in years
        #[arg(long)]
        delta: f64,
    },
    /// Disaggregate discrete parameters down to a finer step
    Disaggregate {
        /// Target step length in years
        #[arg(long)]
        delta: f64,
    },
    /// Recover the continuous limit from discrete parameters
    Limit {
        /// Also write the convergence CSV over dyadic steps 2^-4..2^-16
        #[arg(long)]
        sweep: bool,
    },
    /// Discretize continuous parameters exactly at a given step
    Discretize {
        /// Step length in years
        #[arg(long)]
        delta: f64,
    },
    /// Simulate paths and write terminal states
    Simulate,
    /// Price one option by Monte Carlo and invert its implied vol
    Price,
    /// Price a strike grid per maturity and plot the smiles
    Smile,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli
        .config
        .ok_or_else(|| CliError::Usage("--config <PATH> is required".to_string()))?;
    let ctx = Ctx { config, out: cli.out, seed: cli.seed, threads: cli.threads.max(1) };
    match cli.command {
        Command::Aggregate { delta } => cmd_aggregate(&ctx, delta),
        Command::Disaggregate { delta } => cmd_disaggregate(&ctx, delta),
        Command::Limit { sweep } => cmd_limit(&ctx, sweep),
        Command::Discretize { delta } => cmd_discretize(&ctx, delta),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Price => cmd_price(&ctx),
        Command::Smile => cmd_smile(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
