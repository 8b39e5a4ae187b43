use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use multiprior::montecarlo::presets::PresetOptions;
use multiprior::session::SessionStore;
use multiprior_cli::{commands, http};

#[derive(Parser)]
#[command(name = "multiprior", version, about = "Multi-prior adaptive experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicate one config and write metric tables.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Skip per-stage tables.
        #[arg(long)]
        no_series: bool,
        /// Deviation threshold for the concentration table.
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
    },
    /// Replicate a config over a grid of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// epsilon, floor, bias, shift, discount, cost or burn_in.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_series: bool,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
    },
    /// Tables for one of the built-in study presets.
    Figure {
        /// weights, beliefs, concentration, priors, stopping, bias, earnings or payoff.
        #[arg(long)]
        which: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        reps: u64,
        #[arg(long, default_value_t = 20_240_101)]
        seed: u64,
        /// Prior shift of the stubborn source.
        #[arg(long, default_value_t = 0.3)]
        stubborn_bias: f64,
    },
    /// One experiment, logged as JSONL.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-sample bound functions.
    Bounds {
        #[command(subcommand)]
        command: BoundsCommand,
    },
    /// HTTP session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value = "sessions")]
        data: PathBuf,
    },
}

#[derive(Subcommand)]
enum BoundsCommand {
    Eval {
        /// omega, gamma, eta-star or mistake-bound.
        #[arg(long = "fn")]
        function: String,
        /// JSON parameter file.
        #[arg(long)]
        params: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            reps,
            seed,
            out,
            no_series,
            threshold,
        } => commands::simulate(&config, reps, seed, &out, !no_series, threshold),
        Command::Sweep {
            config,
            param,
            values,
            reps,
            seed,
            out,
            no_series,
            threshold,
        } => commands::sweep(&config, &param, &values, reps, seed, &out, !no_series, threshold),
        Command::Figure {
            which,
            out,
            reps,
            seed,
            stubborn_bias,
        } => commands::figure_tables(
            &which,
            PresetOptions {
                replications: reps,
                seed,
                stubborn_bias,
            },
            &out,
        ),
        Command::Run { config, seed, out } => commands::run(&config, seed, out.as_deref()),
        Command::Bounds {
            command: BoundsCommand::Eval { function, params },
        } => {
            let text = std::fs::read_to_string(&params)
                .with_context(|| format!("reading {}", params.display()))?;
            print!("{}", commands::bounds_eval(&function, &text)?);
            Ok(())
        }
        Command::Serve { addr, data } => {
            let store = SessionStore::open(&data)
                .with_context(|| format!("opening session directory {}", data.display()))?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(http::serve(&addr, Arc::new(store)))?;
            Ok(())
        }
    }
}
